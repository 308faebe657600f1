#include "ada/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "ada/csv.hpp"

namespace ada {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> terms) {
    double hi = kNegInf;
    for (double t : terms) hi = std::max(hi, t);
    if (!std::isfinite(hi)) return hi;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - hi);
    return hi + std::log(sum);
}

double log_gaussian_diag(std::span<const double> x, const Vector& mean, const Vector& var) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - mean[j];
        acc += kLog2Pi + std::log(var[j]) + diff * diff / var[j];
    }
    return -0.5 * acc;
}

double squared_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

std::vector<std::size_t> kmeanspp_centers(std::span<const Vector> x, int k, std::mt19937_64& rng) {
    std::vector<std::size_t> centers;
    centers.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    centers.push_back(pick(rng));
    std::vector<double> d2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d2[i] = squared_distance(x[i], x[centers[0]]);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t next;
        if (total > 0.0) {
            std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
            next = dist(rng);
        } else {
            next = pick(rng);
        }
        centers.push_back(next);
        for (std::size_t i = 0; i < x.size(); ++i)
            d2[i] = std::min(d2[i], squared_distance(x[i], x[next]));
    }
    return centers;
}

// Weighted M-step. `resp` is n x k row-major.
void m_step(std::span<const Vector> x, const std::vector<double>& resp, int k,
            double variance_floor, GmmModel& model) {
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();
    for (int c = 0; c < k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + c];
        if (nk <= 1e-12) {
            // Dead component: zero weight, parameters kept so log-likelihood is unaffected.
            model.weights[c] = 0.0;
            continue;
        }
        Vector mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp[i * k + c];
            if (r == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) mean[j] += r * x[i][j];
        }
        for (auto& v : mean) v /= nk;
        Vector var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp[i * k + c];
            if (r == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[i][j] - mean[j];
                var[j] += r * diff * diff;
            }
        }
        for (auto& v : var) v = std::max(v / nk, variance_floor);
        model.weights[c] = nk / static_cast<double>(n);
        model.means[c] = std::move(mean);
        model.variances[c] = std::move(var);
    }
}

// Fills responsibilities and returns the total log-likelihood.
double e_step(std::span<const Vector> x, const GmmModel& model, std::vector<double>& resp) {
    const int k = model.component_count();
    std::vector<double> logs(k);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int c = 0; c < k; ++c) {
            logs[c] = model.weights[c] > 0.0
                          ? std::log(model.weights[c]) +
                                log_gaussian_diag(x[i], model.means[c], model.variances[c])
                          : kNegInf;
        }
        const double lse = log_sum_exp(logs);
        total += lse;
        for (int c = 0; c < k; ++c) resp[i * k + c] = std::exp(logs[c] - lse);
    }
    return total;
}

}  // namespace

GmmFit fit_gmm_traced(std::span<const Vector> features, int k, std::uint64_t seed,
                      const EmOptions& options) {
    if (features.empty()) throw InvalidInput("fit_gmm: empty feature list");
    if (k < 1) throw InvalidInput("fit_gmm: K must be >= 1");
    const std::size_t d = features.front().size();
    if (d == 0) throw InvalidInput("fit_gmm: zero-dimensional features");
    for (const auto& f : features)
        if (f.size() != d) throw InvalidInput("fit_gmm: inconsistent feature dimensions");
    k = static_cast<int>(std::min<std::size_t>(k, features.size()));

    std::mt19937_64 rng(seed);
    const auto centers = kmeanspp_centers(features, k, rng);

    GmmModel model;
    model.weights.assign(k, 0.0);
    model.means.resize(k);
    model.variances.assign(k, Vector(d, options.variance_floor));
    for (int c = 0; c < k; ++c) model.means[c] = features[centers[c]];

    // Hard assignment to the nearest seed gives the initial parameters.
    const std::size_t n = features.size();
    std::vector<double> resp(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = squared_distance(features[i], model.means[0]);
        for (int c = 1; c < k; ++c) {
            const double dist = squared_distance(features[i], model.means[c]);
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        resp[i * k + best] = 1.0;
    }
    m_step(features, resp, k, options.variance_floor, model);

    GmmFit fit;
    double ll = e_step(features, model, resp);
    fit.log_likelihood_trace.push_back(ll);
    for (int it = 0; it < options.max_iterations; ++it) {
        m_step(features, resp, k, options.variance_floor, model);
        const double next = e_step(features, model, resp);
        fit.log_likelihood_trace.push_back(next);
        ++fit.iterations;
        const double scale = std::abs(ll) > 0.0 ? std::abs(ll) : 1.0;
        const bool done = (next - ll) / scale < options.relative_tolerance;
        ll = next;
        if (done) {
            fit.converged = true;
            break;
        }
    }

    GmmModel pruned;
    for (int c = 0; c < k; ++c) {
        if (model.weights[c] <= 0.0) continue;
        pruned.weights.push_back(model.weights[c]);
        pruned.means.push_back(std::move(model.means[c]));
        pruned.variances.push_back(std::move(model.variances[c]));
    }
    fit.model = std::move(pruned);
    return fit;
}

GmmModel fit_gmm(std::span<const Vector> features, int k, std::uint64_t seed,
                 const EmOptions& options) {
    return fit_gmm_traced(features, k, seed, options).model;
}

double log_density_raw(const GmmModel& model, std::span<const double> z) {
    if (model.component_count() == 0) throw InvalidInput("log_density: empty model");
    if (static_cast<int>(z.size()) != model.dim())
        throw InvalidInput("log_density: dimension mismatch");
    std::vector<double> terms(model.component_count());
    for (int c = 0; c < model.component_count(); ++c)
        terms[c] = std::log(model.weights[c]) +
                   log_gaussian_diag(z, model.means[c], model.variances[c]);
    return log_sum_exp(terms);
}

double log_density(const GmmModel& model, std::span<const double> z) {
    const double v = log_density_raw(model, z);
    return std::isnan(v) ? LOG_FLOOR : std::max(v, LOG_FLOOR);
}

int choose_component_count(std::int64_t n_regions, double ratio) {
    if (n_regions < 1) throw InvalidInput("choose_component_count: n_regions must be >= 1");
    if (!(ratio > 0.0)) throw InvalidInput("choose_component_count: ratio must be positive");
    const long k = std::lround(static_cast<double>(n_regions) / ratio);
    return static_cast<int>(std::clamp<long>(k, 1, MAX_COMPONENTS));
}

std::vector<Vector> sample_gmm(const GmmModel& model, std::size_t n, std::uint64_t seed) {
    std::vector<Vector> out;
    if (n == 0) return out;
    if (model.component_count() == 0) throw InvalidInput("sample_gmm: empty model");
    out.reserve(n);
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick(model.weights.begin(), model.weights.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = model.dim();
    for (std::size_t i = 0; i < n; ++i) {
        const int c = pick(rng);
        Vector x(d);
        for (int j = 0; j < d; ++j)
            x[j] = model.means[c][j] + std::sqrt(model.variances[c][j]) * normal(rng);
        out.push_back(std::move(x));
    }
    return out;
}

DensityEstimators build_estimators(std::span<const Region> regions, Domain domain,
                                   double ratio, std::uint64_t seed, const EmOptions& options) {
    std::map<ClassId, std::vector<Vector>> grouped;
    for (const auto& r : regions) {
        const ClassId c = domain == Domain::Source ? r.majority_class : r.predicted_class;
        grouped[c].push_back(r.feature_z);
    }
    DensityEstimators est;
    est.domain = domain;
    for (const auto& [c, feats] : grouped) {
        const int k = choose_component_count(static_cast<std::int64_t>(feats.size()), ratio);
        est.per_class.emplace(c, fit_gmm(feats, k, mix_seed(seed, static_cast<std::uint64_t>(c)), options));
    }
    return est;
}

void write_gmm_text(std::ostream& out, const GmmModel& model) {
    const int d = model.dim();
    out << "component,weight";
    for (int j = 0; j < d; ++j) out << ",mean_" << j;
    for (int j = 0; j < d; ++j) out << ",var_" << j;
    out << '\n';
    for (int c = 0; c < model.component_count(); ++c) {
        out << c << ',' << csv::format_double(model.weights[c]);
        for (double v : model.means[c]) out << ',' << csv::format_double(v);
        for (double v : model.variances[c]) out << ',' << csv::format_double(v);
        out << '\n';
    }
}

}  // namespace ada
