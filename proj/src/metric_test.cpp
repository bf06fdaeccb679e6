#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cce/metric.hpp"

using namespace cce;

namespace {

LatentSet gaussian_set(std::string id, std::size_t n, std::size_t dim, std::mt19937_64& rng, double sigma = 1.0,
                       double shift = 0.0) {
    std::normal_distribution<double> g(shift, sigma);
    LatentSet s(std::move(id), dim);
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : row) v = g(rng);
        s.add(row);
    }
    return s;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Per-image dist2 recomputed literally from the double sum, without the
// centroid shortcut.
double naive_nsd(const std::vector<LatentSet>& sets) {
    long double total = 0.0L;
    for (const auto& s : sets) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < s.count(); ++i)
            for (std::size_t j = 0; j < s.count(); ++j)
                for (std::size_t d = 0; d < s.dim(); ++d) {
                    const long double diff = s.row(i)[d] - s.row(j)[d];
                    acc += diff * diff;
                }
        total += acc / static_cast<long double>(s.count() * s.count());
    }
    return static_cast<double>(total / sets.size() / (2.0L * sets.front().dim()));
}

}  // namespace

TEST_CASE("two-point hand computations") {
    LatentSet s("a", 1, {1.0, -1.0});
    CHECK(pairwise_sq_distortion(s) == 2.0);
    CHECK(mean_sq_distortion(s) == 2.0);

    const std::vector<LatentSet> one{s};
    const auto r = nsd_estimate(one, 1);
    CHECK(r.nsd_mean == 1.0);
    CHECK(r.dataset_dist2 == 2.0);
    CHECK(r.images == 1);
    CHECK(r.masks == 2);
    CHECK(r.nsd_std == 0.0);
}

TEST_CASE("identical latents give zero distortion") {
    LatentSet s("c", 3);
    for (int i = 0; i < 7; ++i) s.add(std::vector<double>{0.3, -2.0, 5.5});
    CHECK(pairwise_sq_distortion(s) == 0.0);
    CHECK(mean_sq_distortion(s) == 0.0);
    const std::vector<LatentSet> sets{s, s, s};
    CHECK(nsd_estimate(sets, 3).nsd_mean == 0.0);
}

TEST_CASE("pairwise and centroid estimators agree on random sets") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> n_dist(2, 64), d_dist(1, 32);
    std::uniform_real_distribution<double> scale(1e-3, 1e3), shift(-50.0, 50.0);
    double worst = 0.0;
    for (int t = 0; t < 250; ++t) {
        const auto s = gaussian_set("r", n_dist(rng), d_dist(rng), rng, scale(rng), shift(rng));
        const double a = pairwise_sq_distortion(s);
        const double b = mean_sq_distortion(s);
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("distortion preconditions") {
    CHECK_THROWS_AS(pairwise_sq_distortion(LatentSet("x", 2, {1.0, 2.0})), std::invalid_argument);
    CHECK_THROWS_AS(mean_sq_distortion(LatentSet("x", 2, {1.0, 2.0})), std::invalid_argument);
    CHECK_THROWS_AS(LatentSet("x", 2, {1.0, 2.0, 3.0}), std::invalid_argument);
    LatentSet s("x", 2);
    CHECK_THROWS_AS(s.add(std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mean_sq_distortion(LatentSet("x", 1, {1.0, NAN})), std::invalid_argument);
}

TEST_CASE("dataset distortion") {
    const std::vector<double> single{2.0};
    CHECK(dataset_distortion(single) == 2.0);
    const std::vector<double> pair{0.0, 4.0};
    CHECK(dataset_distortion(pair) == 2.0);
    CHECK_THROWS_AS(dataset_distortion(std::vector<double>{}), std::invalid_argument);

    std::mt19937_64 rng(3);
    std::lognormal_distribution<double> ln(0.0, 3.0);
    std::vector<double> xs(250);
    for (auto& x : xs) x = ln(rng);
    long double ref = 0.0L;
    for (double x : xs) ref += x;
    ref /= xs.size();
    CHECK(std::abs(dataset_distortion(xs) - static_cast<double>(ref)) <= 1e-12 * static_cast<double>(ref));
}

TEST_CASE("nsd of i.i.d. standard normal latents is near one") {
    std::mt19937_64 rng(17);
    std::vector<LatentSet> sets;
    for (int j = 0; j < 50; ++j) sets.push_back(gaussian_set("img" + std::to_string(j), 100, 64, rng));
    const auto r = nsd_estimate(sets, 64);
    CHECK(r.nsd_mean >= 0.95);
    CHECK(r.nsd_mean <= 1.05);
}

TEST_CASE("nsd report is internally consistent") {
    std::mt19937_64 rng(8);
    std::vector<LatentSet> sets;
    for (int j = 0; j < 9; ++j) sets.push_back(gaussian_set("i" + std::to_string(j), 12, 5, rng, 0.5 + j));
    const auto r = nsd_estimate(sets, 5);
    REQUIRE(r.per_image_dist2.size() == 9);
    CHECK(r.images == 9);
    CHECK(r.masks == 12);
    CHECK(r.dim == 5);
    CHECK(r.image_ids[3] == "i3");

    long double mean = 0.0L;
    for (double v : r.per_image_dist2) {
        CHECK(v >= 0.0);
        mean += v;
    }
    mean /= 9.0L;
    CHECK(rel_diff(r.dataset_dist2, static_cast<double>(mean)) <= 1e-14);
    CHECK(r.nsd_mean == r.dataset_dist2 / 10.0);
    CHECK(rel_diff(r.nsd_mean, naive_nsd(sets)) <= 1e-12);

    long double ss = 0.0L;
    for (std::size_t j = 0; j < 9; ++j) {
        const long double d = r.per_image_nsd(j) - r.nsd_mean;
        ss += d * d;
    }
    CHECK(rel_diff(r.nsd_std, static_cast<double>(std::sqrt(ss / 8.0L))) <= 1e-12);
}

TEST_CASE("nsd rejects heterogeneous sets") {
    std::mt19937_64 rng(1);
    std::vector<LatentSet> sets{gaussian_set("a", 4, 3, rng), gaussian_set("b", 5, 3, rng)};
    CHECK_THROWS_AS(nsd_estimate(sets, 3), std::invalid_argument);
    sets = {gaussian_set("a", 4, 3, rng), gaussian_set("b", 4, 2, rng)};
    CHECK_THROWS_AS(nsd_estimate(sets, 3), std::invalid_argument);
    CHECK_THROWS_AS(nsd_estimate(std::vector<LatentSet>{}, 3), std::invalid_argument);
}

TEST_CASE("nsd is independent of the worker count") {
    std::mt19937_64 rng(4);
    std::vector<LatentSet> sets;
    for (int j = 0; j < 37; ++j) sets.push_back(gaussian_set("i", 20, 16, rng));
    const auto a = nsd_estimate(sets, 16, 1);
    for (unsigned t : {2u, 3u, 8u}) {
        const auto b = nsd_estimate(sets, 16, t);
        CHECK(b.nsd_mean == a.nsd_mean);
        CHECK(b.nsd_std == a.nsd_std);
        CHECK(b.per_image_dist2 == a.per_image_dist2);
    }
}

TEST_CASE("distortion properties") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 50; ++t) {
        const auto s = gaussian_set("p", 10, 7, rng);
        const double base = mean_sq_distortion(s);
        CHECK(base >= 0.0);

        std::vector<double> shifted = s.values();
        for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k] += 3.0 * static_cast<double>(k % 7) - 4.0;
        CHECK(rel_diff(mean_sq_distortion(LatentSet("p", 7, shifted)), base) <= 1e-12);

        std::vector<double> scaled = s.values();
        for (auto& v : scaled) v *= -2.5;
        CHECK(rel_diff(mean_sq_distortion(LatentSet("p", 7, scaled)), 6.25 * base) <= 1e-12);

        std::vector<std::size_t> order(10);
        for (std::size_t i = 0; i < 10; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        LatentSet p("p", 7);
        for (auto i : order) p.add(s.row(i));
        CHECK(rel_diff(mean_sq_distortion(p), base) <= 1e-13);
        CHECK(rel_diff(pairwise_sq_distortion(p), pairwise_sq_distortion(s)) <= 1e-13);
    }
}

TEST_CASE("nsd vanishes only when latents coincide") {
    LatentSet s("a", 2);
    for (int i = 0; i < 5; ++i) s.add(std::vector<double>{1.0, 2.0});
    s.row(4)[1] += 1e-6;
    CHECK(mean_sq_distortion(s) > 0.0);
}

TEST_CASE("chi-squared reference") {
    std::mt19937_64 rng(1234);
    CHECK(chi2_reference(1, 1000000, rng) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(chi2_reference(64, 100000, rng) == doctest::Approx(128.0).epsilon(0.02));
    for (std::size_t d : {1u, 8u, 32u}) {
        const auto m = chi2_moments(d, 200000, rng);
        CHECK(m.mean_sq_distance == doctest::Approx(2.0 * d).epsilon(0.02));
        CHECK(m.half_sq_variance == doctest::Approx(2.0 * d).epsilon(0.05));
    }
    CHECK_THROWS_AS(chi2_reference(4, 999, rng), std::invalid_argument);
}

TEST_CASE("standardize latents") {
    std::mt19937_64 rng(21);

    SUBCASE("affine-shifted gaussians become unit moments") {
        std::vector<LatentSet> sets;
        std::normal_distribution<double> g(0.0, 1.0);
        for (int j = 0; j < 20; ++j) {
            LatentSet s("s", 3);
            for (int i = 0; i < 50; ++i) {
                s.add(std::vector<double>{5.0 + 3.0 * g(rng), -2.0 + 0.1 * g(rng), 100.0 + 40.0 * g(rng)});
            }
            sets.push_back(std::move(s));
        }
        const auto out = standardize_latents(sets);
        for (std::size_t d = 0; d < 3; ++d) {
            long double m = 0.0L, q = 0.0L;
            std::size_t count = 0;
            for (const auto& s : out.sets)
                for (std::size_t i = 0; i < s.count(); ++i) {
                    m += s.row(i)[d];
                    q += static_cast<long double>(s.row(i)[d]) * s.row(i)[d];
                    ++count;
                }
            m /= count;
            const double var = static_cast<double>(q / count - m * m);
            CHECK(std::abs(static_cast<double>(m)) <= 1e-12);
            CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));
        }
        const auto back = out.stats.invert(out.sets[4].row(7));
        for (std::size_t d = 0; d < 3; ++d) CHECK(back[d] == doctest::Approx(sets[4].row(7)[d]).epsilon(1e-12));
        CHECK(out.stats.zero_variance_dims.empty());
    }

    SUBCASE("standardized data is nearly unchanged") {
        std::vector<LatentSet> sets;
        for (int j = 0; j < 40; ++j) sets.push_back(gaussian_set("g", 100, 4, rng));
        auto first = standardize_latents(sets).sets;
        auto second = standardize_latents(first).sets;
        double worst = 0.0;
        for (std::size_t j = 0; j < first.size(); ++j)
            for (std::size_t k = 0; k < first[j].values().size(); ++k)
                worst = std::max(worst, std::abs(first[j].values()[k] - second[j].values()[k]));
        CHECK(worst <= 1e-6);
    }

    SUBCASE("constant dimension maps to zeros and is reported") {
        std::vector<LatentSet> sets;
        std::normal_distribution<double> g(0.0, 1.0);
        for (int j = 0; j < 3; ++j) {
            LatentSet s("k", 2);
            for (int i = 0; i < 4; ++i) s.add(std::vector<double>{g(rng), 0.7});
            sets.push_back(std::move(s));
        }
        const auto out = standardize_latents(sets);
        for (const auto& s : out.sets)
            for (std::size_t i = 0; i < s.count(); ++i) CHECK(s.row(i)[1] == 0.0);
        REQUIRE(out.stats.zero_variance_dims.size() == 1);
        CHECK(out.stats.zero_variance_dims[0] == 1);
    }

    SUBCASE("needs at least two latents") {
        const std::vector<LatentSet> tiny{LatentSet("t", 2, {1.0, 2.0})};
        CHECK_THROWS_AS(standardize_latents(tiny), std::invalid_argument);
    }
}
