#include "evo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace evo {

void CoverageSpec::validate() const {
    if (!(band_width > 0.0)) throw ConfigError("metrics.band_width: must be > 0");
    if (!(mode_radius > 0.0)) throw ConfigError("metrics.mode_radius: must be > 0");
    if (num_angular_bins < 1) throw ConfigError("metrics.angular_bins: must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("metrics.radius: must be > 0");
}

double diversity_l2(const Batch& samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("diversity_l2: need at least two samples");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto a = samples.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            auto b = samples.row(j);
            double sq = 0.0;
            for (std::size_t d = 0; d < a.size(); ++d) sq += (a[d] - b[d]) * (a[d] - b[d]);
            total += std::sqrt(sq);
        }
    }
    return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double angular_coverage(const Batch& samples, const CoverageSpec& spec) {
    if (samples.empty()) return 0.0;
    if (samples.dim() != 2) throw std::invalid_argument("angular_coverage: samples must be 2-D");
    std::vector<bool> hit(spec.num_angular_bins, false);
    const double cx = spec.center.size() > 0 ? spec.center[0] : 0.0;
    const double cy = spec.center.size() > 1 ? spec.center[1] : 0.0;
    const double sector = 2.0 * std::numbers::pi / static_cast<double>(spec.num_angular_bins);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto p = samples.row(i);
        const double dx = p[0] - cx;
        const double dy = p[1] - cy;
        if (!(std::abs(std::hypot(dx, dy) - spec.radius) < spec.band_width)) continue;
        double angle = std::atan2(dy, dx);
        if (angle < 0.0) angle += 2.0 * std::numbers::pi;
        auto bin = static_cast<std::size_t>(angle / sector);
        hit[std::min(bin, hit.size() - 1)] = true;
    }
    return static_cast<double>(std::count(hit.begin(), hit.end(), true)) / static_cast<double>(hit.size());
}

double mode_coverage(const Batch& samples, const GaussianMixture& model, const CoverageSpec& spec) {
    std::size_t covered = 0;
    for (std::size_t c = 0; c < model.components(); ++c) {
        auto mu = model.mean(c);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto p = samples.row(i);
            double sq = 0.0;
            for (std::size_t d = 0; d < p.size(); ++d) sq += (p[d] - mu[d]) * (p[d] - mu[d]);
            if (sq < spec.mode_radius * spec.mode_radius) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(model.components());
}

RewardSummary reward_summary(std::span<const Event> events) {
    if (events.empty()) throw std::invalid_argument("reward_summary: empty event log");
    RewardSummary s;
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& e : events) {
        sum += e.reward;
        s.max = std::max(s.max, e.reward);
        const double best = s.curve.empty() ? e.reward : std::max(s.curve.back().best, e.reward);
        s.curve.push_back({e.cumulative_nfe, best});
    }
    s.mean = sum / static_cast<double>(events.size());
    double var = 0.0;
    for (const auto& e : events) var += (e.reward - s.mean) * (e.reward - s.mean);
    s.std = std::sqrt(var / static_cast<double>(events.size()));
    return s;
}

double best_at(const std::vector<CurvePoint>& curve, std::uint64_t nfe) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : curve) {
        if (p.nfe > nfe) break;
        best = p.best;
    }
    return best;
}

Batch top_samples(std::span<const Event> events, std::size_t k, std::vector<double>* rewards) {
    std::vector<double> r(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) r[i] = events[i].reward;
    const auto idx = top_indices(r, k);
    Batch out;
    if (rewards) rewards->clear();
    for (std::size_t i : idx) {
        out.push_back(events[i].x);
        if (rewards) rewards->push_back(events[i].reward);
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    std::string s(text);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw RuntimeError(path.string() + ":" + std::to_string(line) + ": malformed number '" + s + "'");
    }
    return v;
}

}  // namespace

void write_event_log(const std::filesystem::path& path, std::span<const Event> events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    const std::size_t dim = events.empty() ? 0 : events.front().x.size();
    out << "event_index,generation,cumulative_nfe,reward";
    for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
    out << '\n';
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        out << i << ',' << e.generation << ',' << e.cumulative_nfe << ',' << format_double(e.reward);
        for (double v : e.x) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw RuntimeError("failed writing " + path.string());
}

std::vector<Event> read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw RuntimeError(path.string() + ": empty event log");
    std::vector<Event> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < 4) throw RuntimeError(path.string() + ":" + std::to_string(line_no) + ": too few columns");
        Event e;
        e.generation = static_cast<int>(parse_double(fields[1], path, line_no));
        e.cumulative_nfe = static_cast<std::uint64_t>(std::stoull(std::string(fields[2])));
        e.reward = parse_double(fields[3], path, line_no);
        for (std::size_t f = 4; f < fields.size(); ++f) e.x.push_back(parse_double(fields[f], path, line_no));
        events.push_back(std::move(e));
    }
    return events;
}

}  // namespace evo
