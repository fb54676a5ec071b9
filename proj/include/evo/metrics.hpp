#pragma once

#include "evo/core.hpp"
#include "evo/evosearch.hpp"
#include "evo/models.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace evo {

/// A sample is "on target" when | ||x - center|| - radius | < band_width.
/// Angular bins split the circle into equal sectors starting at angle 0.
struct CoverageSpec {
    double radius = 2.0;
    std::vector<double> center{0.0, 0.0};
    double band_width = 0.15;
    std::size_t num_angular_bins = 8;
    double mode_radius = 0.6;

    void validate() const;
};

/// Mean Euclidean distance over all unordered pairs.
double diversity_l2(const Batch& samples);

/// Fraction of angular bins holding at least one in-band sample (2-D).
double angular_coverage(const Batch& samples, const CoverageSpec& spec);

/// Fraction of mixture components with a sample within mode_radius of the mean.
double mode_coverage(const Batch& samples, const GaussianMixture& model, const CoverageSpec& spec);

struct CurvePoint {
    std::uint64_t nfe = 0;
    double best = 0.0;
};

struct RewardSummary {
    double mean = 0.0;
    double max = 0.0;
    double std = 0.0;  // population standard deviation
    std::vector<CurvePoint> curve;  // running best at each evaluation event
};

RewardSummary reward_summary(std::span<const Event> events);

/// Running best at a given NFE (the last curve point at or before `nfe`);
/// -infinity if nothing had been evaluated yet.
double best_at(const std::vector<CurvePoint>& curve, std::uint64_t nfe);

/// Top-k events by reward (ties to the earliest event) as a batch.
Batch top_samples(std::span<const Event> events, std::size_t k, std::vector<double>* rewards = nullptr);

/// Event log CSV: event_index,generation,cumulative_nfe,reward,x0,x1,...
/// Numbers are written in shortest round-trip form, so reading a log back
/// reproduces the in-memory values exactly.
void write_event_log(const std::filesystem::path& path, std::span<const Event> events);
std::vector<Event> read_event_log(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace evo
