#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cce/tensor.hpp"

namespace cce {

// Latents of one image under n masks, stored row-major (one row per mask).
class LatentSet {
public:
    LatentSet() = default;
    LatentSet(std::string image_id, std::size_t dim);
    LatentSet(std::string image_id, std::size_t dim, std::vector<double> values);

    const std::string& image_id() const { return image_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t count() const { return dim_ == 0 ? 0 : values_.size() / dim_; }

    void add(std::span<const double> latent);
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    const std::vector<double>& values() const { return values_; }

private:
    std::string image_id_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

struct DistortionReport {
    std::vector<std::string> image_ids;
    std::vector<double> per_image_dist2;
    double dataset_dist2 = 0.0;
    double nsd_mean = 0.0;
    // Sample standard deviation (k - 1 denominator) of per-image dist2 / 2D.
    double nsd_std = 0.0;
    std::size_t dim = 0;
    std::size_t masks = 0;
    std::size_t images = 0;
    bool standardized = false;
    std::string mask_strategy;

    double per_image_nsd(std::size_t j) const { return per_image_dist2[j] / (2.0 * static_cast<double>(dim)); }
};

// (1/n^2) * sum over ordered pairs of ||x_i - x_j||^2. Quadratic in n.
double pairwise_sq_distortion(const LatentSet& latents);

// (2/n) * sum_i ||x_i - mean||^2, equal to pairwise_sq_distortion by the
// sum-of-squared-deviations identity but linear in n.
double mean_sq_distortion(const LatentSet& latents);

double dataset_distortion(std::span<const double> per_image);

// Normalized squared-distortion: dataset dist2 / 2D with per-image spread.
// Images are processed on up to `threads` workers; the reduction runs in
// image order so the result is independent of the worker count.
DistortionReport nsd_estimate(std::span<const LatentSet> sets, std::size_t dim, unsigned threads = 1);

struct Chi2Moments {
    double mean_sq_distance = 0.0;  // estimate of E||X - Y||^2
    double half_sq_variance = 0.0;  // sample variance of ||X - Y||^2 / 2
};

// Monte-Carlo moments of ||X - Y||^2 for independent X, Y ~ N(0, I_dim).
Chi2Moments chi2_moments(std::size_t dim, std::size_t samples, std::mt19937_64& rng);
double chi2_reference(std::size_t dim, std::size_t samples, std::mt19937_64& rng);

struct LatentStatistics {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::size_t> zero_variance_dims;
    double epsilon = 1e-12;

    // Maps a standardized latent back to the original coordinates.
    LatentVector invert(std::span<const double> standardized) const;
};

struct StandardizedLatents {
    std::vector<LatentSet> sets;
    LatentStatistics stats;
};

// Per-dimension z-scoring with moments pooled over every latent of every set.
StandardizedLatents standardize_latents(std::span<const LatentSet> sets);

}  // namespace cce
