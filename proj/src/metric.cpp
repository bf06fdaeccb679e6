#include "cce/metric.hpp"

#include <cmath>
#include <stdexcept>

#include "cce/tensor.hpp"

namespace cce {

LatentSet::LatentSet(std::string image_id, std::size_t dim) : image_id_(std::move(image_id)), dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("latent set: dimension must be positive");
}

LatentSet::LatentSet(std::string image_id, std::size_t dim, std::vector<double> values)
    : image_id_(std::move(image_id)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw std::invalid_argument("latent set: dimension must be positive");
    if (values_.size() % dim_ != 0) {
        throw std::invalid_argument("latent set '" + image_id_ + "': " + std::to_string(values_.size()) +
                                    " values are not a multiple of dimension " + std::to_string(dim_));
    }
}

void LatentSet::add(std::span<const double> latent) {
    if (latent.size() != dim_) {
        throw std::invalid_argument("latent set '" + image_id_ + "': latent of dimension " +
                                    std::to_string(latent.size()) + " added to set of dimension " +
                                    std::to_string(dim_));
    }
    values_.insert(values_.end(), latent.begin(), latent.end());
}

namespace {

void require_distortion_input(const LatentSet& latents) {
    if (latents.dim() == 0) throw std::invalid_argument("distortion: latent dimension must be positive");
    if (latents.values().size() % latents.dim() != 0) {
        throw std::invalid_argument("distortion: dimension mismatch in set '" + latents.image_id() + "'");
    }
    if (latents.count() < 2) {
        throw std::invalid_argument("distortion: set '" + latents.image_id() + "' has " +
                                    std::to_string(latents.count()) + " latents, at least 2 are required");
    }
    for (double v : latents.values()) {
        if (!std::isfinite(v)) throw std::invalid_argument("distortion: non-finite latent in '" + latents.image_id() + "'");
    }
}

}  // namespace

double pairwise_sq_distortion(const LatentSet& latents) {
    require_distortion_input(latents);
    const std::size_t n = latents.count();
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = latents.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto xj = latents.row(j);
            for (std::size_t d = 0; d < latents.dim(); ++d) {
                const double diff = xi[d] - xj[d];
                total.add(diff * diff);
            }
        }
    }
    return total.value() / static_cast<double>(n * n);
}

double mean_sq_distortion(const LatentSet& latents) {
    require_distortion_input(latents);
    const std::size_t n = latents.count();
    const std::size_t dim = latents.dim();
    std::vector<double> centre(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        CompensatedSum s;
        for (std::size_t i = 0; i < n; ++i) s.add(latents.row(i)[d]);
        centre[d] = s.value() / static_cast<double>(n);
    }
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = latents.row(i);
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = xi[d] - centre[d];
            total.add(diff * diff);
        }
    }
    return 2.0 * total.value() / static_cast<double>(n);
}

double dataset_distortion(std::span<const double> per_image) {
    if (per_image.empty()) throw std::invalid_argument("dataset_distortion: no per-image distortions");
    CompensatedSum s;
    for (double v : per_image) s.add(v);
    return s.value() / static_cast<double>(per_image.size());
}

DistortionReport nsd_estimate(std::span<const LatentSet> sets, std::size_t dim, unsigned threads) {
    if (sets.empty()) throw std::invalid_argument("nsd_estimate: at least one image is required");
    if (dim == 0) throw std::invalid_argument("nsd_estimate: latent dimension must be positive");
    const std::size_t n = sets.front().count();
    for (const auto& set : sets) {
        if (set.dim() != dim) {
            throw std::invalid_argument("nsd_estimate: set '" + set.image_id() + "' has dimension " +
                                        std::to_string(set.dim()) + ", expected " + std::to_string(dim));
        }
        if (set.count() != n) {
            throw std::invalid_argument("nsd_estimate: set '" + set.image_id() + "' has " +
                                        std::to_string(set.count()) + " masks, expected " + std::to_string(n));
        }
    }

    DistortionReport report;
    report.dim = dim;
    report.masks = n;
    report.images = sets.size();
    report.per_image_dist2.resize(sets.size());
    report.image_ids.reserve(sets.size());
    for (const auto& set : sets) report.image_ids.push_back(set.image_id());

    parallel_for(sets.size(), threads, [&](std::size_t j) { report.per_image_dist2[j] = mean_sq_distortion(sets[j]); });

    report.dataset_dist2 = dataset_distortion(report.per_image_dist2);
    const double norm = 2.0 * static_cast<double>(dim);
    report.nsd_mean = report.dataset_dist2 / norm;

    if (sets.size() > 1) {
        CompensatedSum sq;
        for (std::size_t j = 0; j < sets.size(); ++j) {
            const double dev = report.per_image_dist2[j] / norm - report.nsd_mean;
            sq.add(dev * dev);
        }
        report.nsd_std = std::sqrt(sq.value() / static_cast<double>(sets.size() - 1));
    }
    return report;
}

Chi2Moments chi2_moments(std::size_t dim, std::size_t samples, std::mt19937_64& rng) {
    if (dim == 0) throw std::invalid_argument("chi2_reference: dimension must be positive");
    if (samples < 1000) throw std::invalid_argument("chi2_reference: at least 1000 samples are required");
    std::normal_distribution<double> normal(0.0, 1.0);
    CompensatedSum sum;
    CompensatedSum sum_sq;
    for (std::size_t s = 0; s < samples; ++s) {
        double dist2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = normal(rng) - normal(rng);
            dist2 += diff * diff;
        }
        sum.add(dist2);
        sum_sq.add(dist2 * dist2);
    }
    const auto count = static_cast<double>(samples);
    Chi2Moments out;
    out.mean_sq_distance = sum.value() / count;
    const double var = (sum_sq.value() - count * out.mean_sq_distance * out.mean_sq_distance) / (count - 1.0);
    out.half_sq_variance = var / 4.0;
    return out;
}

double chi2_reference(std::size_t dim, std::size_t samples, std::mt19937_64& rng) {
    return chi2_moments(dim, samples, rng).mean_sq_distance;
}

LatentVector LatentStatistics::invert(std::span<const double> standardized) const {
    if (standardized.size() != mean.size()) {
        throw std::invalid_argument("latent statistics: dimension mismatch on inversion");
    }
    LatentVector out(standardized.size());
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = standardized[d] * stddev[d] + mean[d];
    return out;
}

StandardizedLatents standardize_latents(std::span<const LatentSet> sets) {
    if (sets.empty()) throw std::invalid_argument("standardize_latents: no latent sets");
    const std::size_t dim = sets.front().dim();
    std::size_t pooled = 0;
    for (const auto& set : sets) {
        if (set.dim() != dim) throw std::invalid_argument("standardize_latents: dimension mismatch");
        pooled += set.count();
    }
    if (pooled < 2) throw std::invalid_argument("standardize_latents: at least 2 pooled latents are required");

    StandardizedLatents out;
    auto& stats = out.stats;
    stats.mean.assign(dim, 0.0);
    stats.stddev.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
        CompensatedSum s;
        for (const auto& set : sets) {
            for (std::size_t i = 0; i < set.count(); ++i) s.add(set.row(i)[d]);
        }
        stats.mean[d] = s.value() / static_cast<double>(pooled);
        CompensatedSum sq;
        for (const auto& set : sets) {
            for (std::size_t i = 0; i < set.count(); ++i) {
                const double dev = set.row(i)[d] - stats.mean[d];
                sq.add(dev * dev);
            }
        }
        const double sd = std::sqrt(sq.value() / static_cast<double>(pooled));
        if (sd < stats.epsilon) {
            stats.zero_variance_dims.push_back(d);
            stats.stddev[d] = stats.epsilon;
        } else {
            stats.stddev[d] = sd;
        }
    }

    std::vector<bool> constant(dim, false);
    for (std::size_t d : stats.zero_variance_dims) constant[d] = true;

    out.sets.reserve(sets.size());
    for (const auto& set : sets) {
        LatentSet scaled = set;
        for (std::size_t i = 0; i < scaled.count(); ++i) {
            auto row = scaled.row(i);
            for (std::size_t d = 0; d < dim; ++d) row[d] = constant[d] ? 0.0 : (row[d] - stats.mean[d]) / stats.stddev[d];
        }
        out.sets.push_back(std::move(scaled));
    }
    return out;
}

}  // namespace cce
