#pragma once

// Service-time and arrival variates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbpandas/errors.hpp"
#include "gbpandas/rng.hpp"
#include "gbpandas/topology.hpp"

namespace gbp {

enum class ServiceFamily { geometric, lognormal };

inline std::string_view to_string(ServiceFamily f) {
  return f == ServiceFamily::geometric ? "geometric" : "lognormal";
}

inline ServiceFamily parse_service_family(std::string_view name) {
  if (name == "geometric") return ServiceFamily::geometric;
  if (name == "lognormal") return ServiceFamily::lognormal;
  throw ConfigError("unknown service family '" + std::string(name) + "'");
}

// Parameters of the normal underlying a log-normal with the given moments.
struct LognormalParams {
  double location;
  double sigma;

  static LognormalParams from_moments(double mean, double stddev) {
    const double var = std::log1p((stddev * stddev) / (mean * mean));
    return {std::log(mean) - 0.5 * var, std::sqrt(var)};
  }
};

// Per-level service time in whole slots (always >= 1). Level n has nominal
// mean means[n-1]; log-normal draws have std equal to the mean and are
// rounded up, so their discretized mean exceeds the nominal one.
class ServiceModel {
 public:
  ServiceModel(ServiceFamily family, std::vector<double> means)
      : family_(family), means_(std::move(means)) {
    if (means_.empty()) throw ConfigError("service model needs at least one level");
    for (std::size_t i = 0; i < means_.size(); ++i) {
      if (!(means_[i] > 0.0) || !std::isfinite(means_[i])) {
        throw ConfigError("service means must be positive and finite");
      }
      if (i > 0 && !(means_[i - 1] < means_[i])) {
        throw ConfigError("service means must be strictly increasing in the level");
      }
    }
    if (family_ == ServiceFamily::geometric && means_.front() < 1.0) {
      throw ConfigError("geometric service needs means >= 1 slot (success probability <= 1)");
    }
    effective_.reserve(means_.size());
    for (double mu : means_) {
      effective_.push_back(family_ == ServiceFamily::geometric ? mu : discretized_lognormal_mean(mu));
    }
  }

  ServiceFamily family() const { return family_; }
  int levels() const { return static_cast<int>(means_.size()); }
  std::span<const double> nominal_means() const { return means_; }

  // Expected slots per level of the sampled (discrete) distribution. This is
  // the 1/alpha_n used for workloads, routing weights and capacity.
  std::span<const double> effective_means() const { return effective_; }

  std::int64_t sample(Level n, Rng& rng) const {
    const double mu = mean_at(n);
    if (family_ == ServiceFamily::geometric) {
      if (mu == 1.0) return 1;
      const double p = 1.0 / mu;
      const double k = std::ceil(std::log(rng.uniform_open()) / std::log1p(-p));
      return std::max<std::int64_t>(1, static_cast<std::int64_t>(k));
    }
    const auto params = LognormalParams::from_moments(mu, mu);
    const double x = std::exp(params.location + params.sigma * rng.normal());
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x)));
  }

  // E[ceil(X)] for X log-normal with mean = std = mu, as the survival sum
  // 1 + sum_{k>=1} P(X > k).
  static double discretized_lognormal_mean(double mu) {
    const auto params = LognormalParams::from_moments(mu, mu);
    double total = 1.0;
    for (std::int64_t k = 1; k < 100'000'000; ++k) {
      const double z = (std::log(static_cast<double>(k)) - params.location) / params.sigma;
      const double tail = 0.5 * std::erfc(z / std::numbers::sqrt2);
      total += tail;
      if (tail < 1e-17 * total && z > 0) break;
    }
    return total;
  }

 private:
  double mean_at(Level n) const {
    if (n < 1 || n > levels()) throw std::domain_error("service level out of range");
    return means_[static_cast<std::size_t>(n - 1)];
  }

  ServiceFamily family_;
  std::vector<double> means_;
  std::vector<double> effective_;
};

// Arrival rate per task type (indexed like the LocalityTable's type list).
struct RateVector {
  std::vector<double> rates;

  double total() const {
    double s = 0.0;
    for (double r : rates) s += r;
    return s;
  }
};

// Probability of each task type; sampled by inverse CDF.
class Popularity {
 public:
  explicit Popularity(std::vector<double> weights) : probs_(std::move(weights)) {
    if (probs_.empty()) throw ConfigError("popularity needs at least one type");
    double sum = 0.0;
    for (double w : probs_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("popularity weights must be >= 0");
      sum += w;
    }
    if (!(sum > 0.0)) throw ConfigError("popularity weights sum to zero");
    cdf_.reserve(probs_.size());
    double acc = 0.0;
    for (double& w : probs_) {
      w /= sum;
      acc += w;
      cdf_.push_back(acc);
    }
    cdf_.back() = 1.0;
  }

  static Popularity uniform(std::size_t types) { return Popularity(std::vector<double>(types, 1.0)); }

  // Weight of the k-th type (1-based rank) proportional to k^-s.
  static Popularity zipf(std::size_t types, double s) {
    std::vector<double> w(types);
    for (std::size_t k = 0; k < types; ++k) w[k] = std::pow(static_cast<double>(k + 1), -s);
    return Popularity(std::move(w));
  }

  std::size_t size() const { return probs_.size(); }
  std::span<const double> probabilities() const { return probs_; }

  TypeIndex sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<TypeIndex>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                            static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

// Per-slot arrivals: Poisson(poisson_rate) count conditioned on <= cap,
// types i.i.d. from the popularity. Sampling from the conditional pmf is
// equal in law to redrawing on exceedance.
class ArrivalModel {
 public:
  ArrivalModel(double poisson_rate, Popularity popularity, std::size_t cap)
      : rate_(poisson_rate), popularity_(std::move(popularity)), cap_(cap) {
    if (!(rate_ >= 0.0) || !std::isfinite(rate_)) throw ConfigError("arrival rate must be >= 0");
    if (cap_ < 1) throw ConfigError("arrival cap must be >= 1");
    pmf_ = truncated_poisson_pmf(rate_, cap_);
    cdf_.resize(pmf_.size());
    double acc = 0.0;
    mean_ = 0.0;
    for (std::size_t k = 0; k < pmf_.size(); ++k) {
      acc += pmf_[k];
      cdf_[k] = acc;
      mean_ += static_cast<double>(k) * pmf_[k];
    }
    cdf_.back() = 1.0;
  }

  // Model whose truncated mean count per slot equals `mean_per_slot`.
  static ArrivalModel with_mean(double mean_per_slot, Popularity popularity, std::size_t cap) {
    if (!(mean_per_slot >= 0.0) || !(mean_per_slot < static_cast<double>(cap))) {
      throw ConfigError("mean arrivals per slot must lie in [0, cap)");
    }
    double lo = 0.0;
    double hi = std::max(1.0, 2.0 * mean_per_slot);
    while (truncated_mean(hi, cap) < mean_per_slot) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (truncated_mean(mid, cap) < mean_per_slot ? lo : hi) = mid;
    }
    const double rate = std::abs(truncated_mean(lo, cap) - mean_per_slot) <
                                std::abs(truncated_mean(hi, cap) - mean_per_slot)
                            ? lo
                            : hi;
    return ArrivalModel(rate, std::move(popularity), cap);
  }

  double poisson_rate() const { return rate_; }
  std::size_t cap() const { return cap_; }
  const Popularity& popularity() const { return popularity_; }
  // Expected arrivals per slot after truncation.
  double mean_count() const { return mean_; }
  double zero_probability() const { return pmf_.front(); }

  std::size_t sample_count(Rng& rng) const {
    if (rate_ == 0.0) return 0;
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cap_);
  }

  void sample(Rng& rng, std::vector<TypeIndex>& out) const {
    out.clear();
    const std::size_t count = sample_count(rng);
    for (std::size_t i = 0; i < count; ++i) out.push_back(popularity_.sample(rng));
  }

  RateVector effective_rate_vector() const {
    RateVector v;
    v.rates.reserve(popularity_.size());
    for (double p : popularity_.probabilities()) v.rates.push_back(mean_ * p);
    return v;
  }

  static std::vector<double> truncated_poisson_pmf(double rate, std::size_t cap) {
    std::vector<double> pmf(cap + 1, 0.0);
    if (rate == 0.0) {
      pmf[0] = 1.0;
      return pmf;
    }
    std::vector<double> logp(cap + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= cap; ++k) {
      const double kd = static_cast<double>(k);
      logp[k] = -rate + kd * std::log(rate) - std::lgamma(kd + 1.0);
      top = std::max(top, logp[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k <= cap; ++k) {
      pmf[k] = std::exp(logp[k] - top);
      z += pmf[k];
    }
    for (double& p : pmf) p /= z;
    return pmf;
  }

  static double truncated_mean(double rate, std::size_t cap) {
    const auto pmf = truncated_poisson_pmf(rate, cap);
    double m = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
    return m;
  }

 private:
  double rate_;
  Popularity popularity_;
  std::size_t cap_;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  double mean_ = 0.0;
};

}  // namespace gbp
