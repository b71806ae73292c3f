#include "amip/metrics.hpp"
#include "amip/error.hpp"
#include "amip/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace amip {

Eigen::Index drop_count(double alpha, Eigen::Index n) {
    if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0) throw BoundsError("alpha must lie in [0, 1]");
    return static_cast<Eigen::Index>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

AmisResult amis(const InfluenceVector& inf, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw BoundsError("alpha must lie in (0, 1]");
    const Eigen::Index n = inf.size();
    const Eigen::Index budget = drop_count(alpha, n);
    if (budget == 0)
        throw AlphaTooSmallError("alpha=" + std::to_string(alpha) + " allows no removals at N=" + std::to_string(n));

    AmisResult out;
    out.alpha = alpha;
    for (Eigen::Index idx : inf.sorted_order) {
        if (static_cast<Eigen::Index>(out.dropped_indices.size()) == budget || !(inf.psi(idx) < 0.0)) break;
        out.dropped_indices.push_back(idx);
        out.amip -= inf.psi(idx);
    }
    out.w_star = WeightVector::dropping(n, out.dropped_indices);
    return out;
}

ApipResult apip(const InfluenceVector& inf, double delta) {
    if (!std::isfinite(delta)) throw BoundsError("delta must be finite");
    ApipResult out;
    out.delta = delta;
    double total = 0.0;
    for (Eigen::Index idx : inf.sorted_order) {
        if (!(inf.psi(idx) < 0.0)) break;
        total -= inf.psi(idx);
        out.cumulative_path.push_back(total);
        if (!out.m_removed && total > delta) {
            out.m_removed = static_cast<Eigen::Index>(out.cumulative_path.size());
            out.alpha_star = static_cast<double>(*out.m_removed) / static_cast<double>(inf.size());
        }
    }
    return out;
}

Decomposition decompose(const InfluenceVector& inf, const AmisResult& selection, double sigma_psi) {
    if (!(sigma_psi >= 0.0)) throw BoundsError("noise must be nonnegative");
    const double n = static_cast<double>(inf.size());
    const double a = static_cast<double>(selection.dropped_indices.size()) / n;
    Decomposition out;
    out.sigma_psi = sigma_psi;
    out.gamma_bound = std::sqrt(a * (1.0 - a));
    if (sigma_psi == 0.0) return out;
    out.gamma_n = (n / sigma_psi) * inf.psi;
    double sum = 0.0;
    for (Eigen::Index idx : selection.dropped_indices) sum += out.gamma_n(idx);
    out.gamma_alpha = -sum / n;
    return out;
}

RefitCheck refit_lower_bound(const RegressionProblem& problem, const FitResult& fit_full,
                             const QuantityOfInterest& qoi, const AmisResult& selection) {
    const WeightVector ones = WeightVector::ones(problem.n_obs());
    const WeightVector& w = selection.w_star.size() ? selection.w_star : ones;
    RefitCheck out;
    out.phi_before = qoi_value(qoi, fit_full, problem, ones);
    const FitResult refit = fit(problem, w);
    out.phi_after = qoi_value(qoi, refit, problem, w);
    out.exact_change = out.phi_after - out.phi_before;
    out.predicted_change = selection.amip;
    out.delta = qoi.delta;
    out.achieved = out.exact_change >= qoi.delta;
    out.theta_after = refit.theta;
    if (qoi.kind != QoiKind::Custom)
        out.se_after = standard_error_at(refit, problem, refit.theta, w, qoi.se_options, qoi.target);
    return out;
}

namespace {

std::uint64_t subset_count(std::uint64_t n, std::uint64_t m, std::uint64_t cap) {
    std::uint64_t total = 0;
    std::uint64_t c = 1;  // C(n, k)
    for (std::uint64_t k = 1; k <= m && k <= n; ++k) {
        // C(n, k) = C(n, k-1) * (n - k + 1) / k, exact in 128-bit.
        const unsigned __int128 next = static_cast<unsigned __int128>(c) * (n - k + 1) / k;
        if (next > cap) return cap + 1;
        c = static_cast<std::uint64_t>(next);
        total += c;
        if (total > cap) return cap + 1;
    }
    return total;
}

// Lexicographic successor of a k-combination of [0, n); false after the last.
bool next_combination(std::vector<Eigen::Index>& c, Eigen::Index n) {
    const auto k = static_cast<Eigen::Index>(c.size());
    Eigen::Index i = k - 1;
    while (i >= 0 && c[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++c[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
    return true;
}

struct Candidate {
    double value = 0.0;
    std::vector<Eigen::Index> set;
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.set < b.set;
}

}  // namespace

BruteForceResult brute_force_mip(const RegressionProblem& problem, const QuantityOfInterest& qoi,
                                 Eigen::Index max_drop) {
    const Eigen::Index n = problem.n_obs();
    if (max_drop < 0) throw BoundsError("max_drop must be nonnegative");
    const std::uint64_t total =
        subset_count(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(max_drop), kMaxBruteForceFits);
    if (total > kMaxBruteForceFits)
        throw EnumerationTooLargeError("enumerating drop sets of size <= " + std::to_string(max_drop) +
                                       " at N=" + std::to_string(n) + " exceeds " +
                                       std::to_string(kMaxBruteForceFits) + " refits");

    const WeightVector ones = WeightVector::ones(n);
    const double phi_full = qoi_value(qoi, fit(problem, ones), problem, ones);

    Candidate best;  // the empty set, change 0
    BruteForceResult out;
    std::mutex merge_mutex;

    for (Eigen::Index k = 1; k <= std::min(max_drop, n); ++k) {
        std::vector<Eigen::Index> flat;
        std::vector<Eigen::Index> comb(static_cast<std::size_t>(k));
        for (Eigen::Index i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
        do {
            flat.insert(flat.end(), comb.begin(), comb.end());
        } while (next_combination(comb, n));
        const std::size_t count = flat.size() / static_cast<std::size_t>(k);

        parallel_for(
            count,
            [&](std::size_t begin, std::size_t end) {
                Candidate local;
                bool have = false;
                std::uint64_t fits = 0, skipped = 0;
                for (std::size_t s = begin; s < end; ++s) {
                    std::span<const Eigen::Index> set(flat.data() + s * static_cast<std::size_t>(k),
                                                      static_cast<std::size_t>(k));
                    const WeightVector w = WeightVector::dropping(n, set);
                    double value = 0.0;
                    try {
                        value = qoi_value(qoi, fit(problem, w), problem, w) - phi_full;
                    } catch (const DegenerateSubsetError&) {
                        ++skipped;
                        continue;
                    } catch (const WeakInstrumentError&) {
                        ++skipped;
                        continue;
                    }
                    ++fits;
                    Candidate c{value, std::vector<Eigen::Index>(set.begin(), set.end())};
                    if (!have || better(c, local)) {
                        local = std::move(c);
                        have = true;
                    }
                }
                std::lock_guard<std::mutex> lock(merge_mutex);
                out.fits += fits;
                out.skipped += skipped;
                if (have && better(local, best)) best = std::move(local);
            },
            64);
    }
    out.exact_mis = std::move(best.set);
    out.exact_mip = best.value;
    return out;
}

}  // namespace amip
