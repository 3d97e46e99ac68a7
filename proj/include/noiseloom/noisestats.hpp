// noisestats.hpp — noise characterization from trajectory ensembles (moments,
// autocorrelation, power spectral density) and the pulsed-probe spectroscopy
// pipeline: filter functions, Gaussian attenuation, spectrum reconstruction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "noiseloom/errors.hpp"
#include "noiseloom/sampler.hpp"
#include "noiseloom/util.hpp"

namespace noiseloom::noisestats {

using sampler::TrajectoryEnsemble;

// Two-term ensemble estimator of the autocorrelation at grid indices (l1, l2):
// the raw product average minus the product of the two ensemble means. The
// second term carries an O(1/N) bias which is kept as-is; see
// autocorrelation_unbiased for the corrected variant.
inline double autocorrelation(const TrajectoryEnsemble& ens, std::size_t l1, std::size_t l2) {
    const std::size_t k = ens.steps();
    if (l1 >= k || l2 >= k) {
        throw IndexOutOfRange("autocorrelation: grid index out of range (k = " +
                              std::to_string(k) + ")");
    }
    const std::size_t n = ens.size();
    double prod = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = ens.xi(j, l1);
        const double b = ens.xi(j, l2);
        prod += a * b;
        m1 += a;
        m2 += b;
    }
    const double dn = static_cast<double>(n);
    return prod / dn - (m1 / dn) * (m2 / dn);
}

inline double autocorrelation_unbiased(const TrajectoryEnsemble& ens, std::size_t l1,
                                       std::size_t l2) {
    const std::size_t n = ens.size();
    if (n < 2) throw InsufficientData("autocorrelation_unbiased: need at least 2 trajectories");
    return autocorrelation(ens, l1, l2) * static_cast<double>(n) / static_cast<double>(n - 1);
}

struct AcfEstimate {
    std::vector<double> lag_times;  // lag * dt
    std::vector<double> c;
    std::vector<double> stderr_c;   // trajectory-wise standard error
};

namespace detail {

// Per-trajectory pooled lag products v[lag][j] plus the per-site means, the
// raw material for both the ACF and the spectral estimate. Trajectories are
// independent, so spreads over j give honest error bars even for quantities
// that mix many (correlated) lags.
struct PooledProducts {
    std::vector<std::vector<double>> v;  // [lag][trajectory]
    std::vector<double> site_mean;       // [grid index]
    std::vector<double> mean_bias;       // [lag]
};

inline PooledProducts pooled_products(const TrajectoryEnsemble& ens, std::size_t max_lag) {
    const std::size_t k = ens.steps();
    const std::size_t n = ens.size();
    if (k == 0 || n == 0) throw InsufficientData("pooled_autocorrelation: empty ensemble");
    if (max_lag >= k) {
        throw IndexOutOfRange("pooled_autocorrelation: max lag " + std::to_string(max_lag) +
                              " >= k = " + std::to_string(k));
    }

    PooledProducts out;
    out.site_mean.assign(k, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < k; ++l) out.site_mean[l] += ens.xi(j, l);
    for (auto& m : out.site_mean) m /= static_cast<double>(n);

    out.v.assign(max_lag + 1, std::vector<double>(n, 0.0));
    out.mean_bias.assign(max_lag + 1, 0.0);
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        const std::size_t starts = k - lag;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < starts; ++l) s += ens.xi(j, l) * ens.xi(j, l + lag);
            out.v[lag][j] = s / static_cast<double>(starts);
        }
        double bias = 0.0;
        for (std::size_t l = 0; l < starts; ++l)
            bias += out.site_mean[l] * out.site_mean[l + lag];
        out.mean_bias[lag] = bias / static_cast<double>(starts);
    }
    return out;
}

inline double stderr_of_mean(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n - 1);
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace detail

// Stationary estimator: for each lag the product average is pooled over all
// start indices, then the pooled mean product is subtracted.
inline AcfEstimate pooled_autocorrelation(const TrajectoryEnsemble& ens, std::size_t max_lag) {
    const auto pooled = detail::pooled_products(ens, max_lag);
    const std::size_t n = ens.size();

    AcfEstimate out;
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        double mean_v = 0.0;
        for (double x : pooled.v[lag]) mean_v += x;
        mean_v /= static_cast<double>(n);
        out.lag_times.push_back(ens.dt() * static_cast<double>(lag));
        out.c.push_back(mean_v - pooled.mean_bias[lag]);
        out.stderr_c.push_back(detail::stderr_of_mean(pooled.v[lag]));
    }
    return out;
}

struct SpectralEstimate {
    std::vector<double> omega;
    std::vector<double> s;
    std::vector<double> stderr_s;
    std::string estimator;
};

// Cosine transform of the pooled autocorrelation with trapezoidal weighting
// and the symmetric extension C(-s) = C(s). Frequencies cover one symmetric
// band m * pi / (L * dt), m = -L..L. Error bars come from the spread of the
// per-trajectory transforms, which keeps the strong cross-lag correlations.
inline SpectralEstimate estimate_psd(const TrajectoryEnsemble& ens, std::size_t lag_window) {
    if (ens.steps() < 4) throw InsufficientData("estimate_psd: need at least 4 grid points");
    if (lag_window < 1 || lag_window >= ens.steps()) {
        throw IndexOutOfRange("estimate_psd: lag window must be in [1, k-1]");
    }
    const auto pooled = detail::pooled_products(ens, lag_window);
    const double dt = ens.dt();
    const std::size_t big_l = lag_window;
    const std::size_t n = ens.size();

    std::vector<double> c(big_l + 1);
    for (std::size_t lag = 0; lag <= big_l; ++lag) {
        double mean_v = 0.0;
        for (double x : pooled.v[lag]) mean_v += x;
        c[lag] = mean_v / static_cast<double>(n) - pooled.mean_bias[lag];
    }

    SpectralEstimate out;
    out.estimator = "pooled-cosine-trapezoid";
    std::vector<double> per_traj(n);
    for (std::size_t im = 0; im <= 2 * big_l; ++im) {
        const long m = static_cast<long>(im) - static_cast<long>(big_l);
        const double w = static_cast<double>(m) * M_PI / (static_cast<double>(big_l) * dt);

        double s = c[0];
        std::fill(per_traj.begin(), per_traj.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) per_traj[j] = pooled.v[0][j];
        for (std::size_t lag = 1; lag <= big_l; ++lag) {
            const double weight = (lag == big_l) ? 1.0 : 2.0;
            const double cw = weight * std::cos(w * dt * static_cast<double>(lag));
            s += cw * c[lag];
            for (std::size_t j = 0; j < n; ++j) per_traj[j] += cw * pooled.v[lag][j];
        }
        out.omega.push_back(w);
        out.s.push_back(dt * s);
        out.stderr_s.push_back(dt * detail::stderr_of_mean(per_traj));
    }
    return out;
}

// Instantaneous pi-pulse control protocol: flip times strictly inside (0, T).
struct PulseSequence {
    double duration;
    std::vector<double> flip_times;

    PulseSequence(double total_duration, std::vector<double> flips)
        : duration(total_duration), flip_times(std::move(flips)) {
        if (!(duration > 0.0)) throw InvalidParameter("pulse sequence: duration must be positive");
        double prev = 0.0;
        for (double tau : flip_times) {
            if (!(tau > prev) || !(tau < duration)) {
                throw InvalidParameter("pulse sequence: flip times must be strictly increasing "
                                       "inside (0, duration)");
            }
            prev = tau;
        }
    }
};

// n periods of a square-wave modulation at angular frequency omega_ctr:
// duration 2*pi*n/omega_ctr, flips every half period.
inline PulseSequence periodic_sequence(double omega_ctr, std::size_t n_periods) {
    if (!(omega_ctr > 0.0)) throw InvalidParameter("periodic_sequence: omega_ctr must be positive");
    if (n_periods < 1) throw InvalidParameter("periodic_sequence: need at least one period");
    const double half = M_PI / omega_ctr;
    std::vector<double> flips;
    flips.reserve(2 * n_periods - 1);
    for (std::size_t j = 1; j < 2 * n_periods; ++j) {
        flips.push_back(half * static_cast<double>(j));
    }
    return PulseSequence(half * static_cast<double>(2 * n_periods), std::move(flips));
}

// Control modulation: starts at +1 and changes sign at each flip time.
inline double filter_function(const PulseSequence& seq, double t) {
    if (!(t >= 0.0) || !(t <= seq.duration)) {
        throw OutOfDomain("filter_function: t outside [0, duration]");
    }
    std::size_t flips = 0;
    for (double tau : seq.flip_times) {
        if (tau <= t) ++flips;
        else break;
    }
    return (flips % 2 == 0) ? 1.0 : -1.0;
}

struct QuadratureOptions {
    std::size_t nodes_per_axis = 6;        // Gauss-Legendre order per block axis
    std::size_t max_evaluations = 50'000'000;
};

namespace detail {

// 6-point Gauss-Legendre rule on [0, 1].
inline const std::vector<std::pair<double, double>>& gl6_unit() {
    static const std::vector<std::pair<double, double>> rule = [] {
        const double x[3] = {0.2386191860831969, 0.6612093864662645, 0.9324695142031521};
        const double w[3] = {0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
        std::vector<std::pair<double, double>> r;
        for (int i = 2; i >= 0; --i) r.emplace_back(0.5 * (1.0 - x[i]), 0.5 * w[i]);
        for (int i = 0; i < 3; ++i) r.emplace_back(0.5 * (1.0 + x[i]), 0.5 * w[i]);
        return r;
    }();
    return rule;
}

}  // namespace detail

// Second-cumulant attenuation: chi = (1/2) * double integral over [0,t]^2 of
// f(t1) f(t2) C(t1, t2); returns exp(-chi). The domain is split at the pulse
// times (f is constant per segment); off-diagonal blocks use a tensor
// Gauss-Legendre rule, diagonal blocks are folded onto the lower triangle
// (C is assumed symmetric) and mapped smoothly, which keeps the common
// |t1 - t2| kink of stationary kernels away from the quadrature nodes.
inline double gaussian_attenuation(const std::function<double(double, double)>& corr,
                                   const PulseSequence& seq, double t,
                                   const QuadratureOptions& opts = {}) {
    if (!(t >= 0.0) || t > seq.duration) {
        throw OutOfDomain("gaussian_attenuation: t outside [0, duration]");
    }
    if (t == 0.0) return 1.0;

    std::vector<double> edges{0.0};
    for (double tau : seq.flip_times) {
        if (tau < t) edges.push_back(tau);
        else break;
    }
    edges.push_back(t);

    const std::size_t m = edges.size() - 1;
    const auto& rule = detail::gl6_unit();
    const std::size_t nodes = rule.size();
    const std::size_t evals = (m * (m + 1) / 2) * nodes * nodes;
    if (evals > opts.max_evaluations) {
        throw QuadratureBudget("gaussian_attenuation: " + std::to_string(evals) +
                               " evaluations exceed budget " +
                               std::to_string(opts.max_evaluations));
    }

    std::vector<double> sign(m);
    for (std::size_t i = 0; i < m; ++i) sign[i] = (i % 2 == 0) ? 1.0 : -1.0;

    double chi = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double ai = edges[i], li = edges[i + 1] - edges[i];
        // Off-diagonal blocks, doubled by symmetry.
        for (std::size_t j = i + 1; j < m; ++j) {
            const double aj = edges[j], lj = edges[j + 1] - edges[j];
            double blk = 0.0;
            for (const auto& [u, wu] : rule) {
                const double t1 = ai + u * li;
                double row = 0.0;
                for (const auto& [v, wv] : rule) row += wv * corr(t1, aj + v * lj);
                blk += wu * row;
            }
            chi += 2.0 * sign[i] * sign[j] * blk * li * lj;
        }
        // Diagonal block: twice the lower triangle t2 <= t1.
        double tri = 0.0;
        for (const auto& [u, wu] : rule) {
            const double t1 = ai + u * li;
            double row = 0.0;
            for (const auto& [v, wv] : rule) row += wv * corr(t1, ai + u * v * li);
            tri += wu * u * row;
        }
        chi += 2.0 * tri * li * li;
    }
    return std::exp(-0.5 * chi);
}

struct DecayObservation {
    double omega_ctr;
    double ratio;  // coherence divided by its initial value, in (0, 1]
    double t;
};

// Invert the narrow-band dephasing law: S(omega_ctr) = -(pi^2 / 4t) ln(ratio).
inline SpectralEstimate reconstruct_psd(const std::vector<DecayObservation>& observations) {
    SpectralEstimate out;
    out.estimator = "decay-inversion";
    for (const auto& obs : observations) {
        if (!(obs.ratio > 0.0) || obs.ratio > 1.0) {
            throw InvalidRatio("reconstruct_psd: ratio must lie in (0, 1], got " +
                               util::format_g17(obs.ratio));
        }
        if (!(obs.t > 0.0)) throw InvalidParameter("reconstruct_psd: t must be positive");
        out.omega.push_back(obs.omega_ctr);
        out.s.push_back(-(M_PI * M_PI) / (4.0 * obs.t) * std::log(obs.ratio));
        out.stderr_s.push_back(0.0);
    }
    return out;
}

// Full probe protocol at one filter frequency: run a square-wave sequence of
// at least min_duration, evaluate the attenuation of the supplied
// autocorrelation, and return the decay observation to invert.
inline DecayObservation spectroscopy_observation(
    const std::function<double(double, double)>& corr, double omega_ctr, double min_duration,
    const QuadratureOptions& opts = {}) {
    const double period = 2.0 * M_PI / omega_ctr;
    const std::size_t n_periods =
        static_cast<std::size_t>(std::ceil(min_duration / period));
    const PulseSequence seq = periodic_sequence(omega_ctr, std::max<std::size_t>(1, n_periods));
    const double ratio = gaussian_attenuation(corr, seq, seq.duration, opts);
    return DecayObservation{omega_ctr, ratio, seq.duration};
}

inline void write_acf_csv(const AcfEstimate& acf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "lag,c,stderr\n";
    for (std::size_t i = 0; i < acf.c.size(); ++i) {
        out << util::format_g17(acf.lag_times[i]) << ',' << util::format_g17(acf.c[i]) << ','
            << util::format_g17(acf.stderr_c[i]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline void write_psd_csv(const SpectralEstimate& psd, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "omega,s,stderr\n";
    for (std::size_t i = 0; i < psd.s.size(); ++i) {
        out << util::format_g17(psd.omega[i]) << ',' << util::format_g17(psd.s[i]) << ','
            << util::format_g17(psd.stderr_s[i]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace noiseloom::noisestats
