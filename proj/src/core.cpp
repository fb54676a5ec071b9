#include "evo/core.hpp"

#include <algorithm>

namespace evo {

Batch::Batch(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0 || data_.size() % dim_ != 0) {
        throw std::invalid_argument("Batch: data length is not a multiple of dim");
    }
}

void Batch::append(const Batch& other) {
    if (other.empty()) return;
    if (dim_ == 0) dim_ = other.dim_;
    if (other.dim_ != dim_) throw std::invalid_argument("Batch::append: dimension mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

void Batch::push_back(std::span<const double> point) {
    if (dim_ == 0) dim_ = point.size();
    if (point.size() != dim_) throw std::invalid_argument("Batch::push_back: dimension mismatch");
    data_.insert(data_.end(), point.begin(), point.end());
}

Batch Batch::gather(std::span<const std::size_t> indices) const {
    Batch out(indices.size(), dim_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        auto src = row(indices[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

}  // namespace evo
