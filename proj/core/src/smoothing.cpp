#include "csisense/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "csisense/error.hpp"

namespace csisense {
namespace {

void check_window(std::size_t w, std::size_t len, const char* op) {
  if (w < 1 || w % 2 == 0) {
    throw ValidationError(std::string(op) + " needs an odd window >= 1");
  }
  if (w > len) {
    throw ValidationError(std::string(op) + " window " + std::to_string(w) +
                          " exceeds series length " + std::to_string(len));
  }
}

void check_finite(const Series& s, const char* op) {
  if (s.empty()) {
    throw ValidationError(std::string(op) + " input must be non-empty");
  }
  for (double v : s) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(op) + " input must be finite");
    }
  }
}

double median_of(std::vector<double>& scratch) {
  const std::size_t n = scratch.size();
  const std::size_t mid = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
  double m = scratch[mid];
  if (n % 2 == 0) {
    const double lower =
        *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace

Series moving_average(const Series& s, std::size_t w) {
  check_finite(s, "moving_average");
  check_window(w, s.size(), "moving_average");
  const std::size_t h = (w - 1) / 2;
  Series out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(s.size() - 1, i + h);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += s[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

Series weighted_ma(const Series& s, const std::vector<double>& weights) {
  check_finite(s, "weighted_ma");
  check_window(weights.size(), s.size(), "weighted_ma");
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("weighted_ma weights must sum to 1 within 1e-12");
  }
  const std::size_t h = (weights.size() - 1) / 2;
  Series out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double acc = 0.0, norm = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
      const std::ptrdiff_t j =
          static_cast<std::ptrdiff_t>(i + m) - static_cast<std::ptrdiff_t>(h);
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(s.size())) continue;
      acc += weights[m] * s[static_cast<std::size_t>(j)];
      norm += weights[m];
    }
    out[i] = acc / norm;
  }
  return out;
}

Series ewma(const Series& s, double alpha) {
  check_finite(s, "ewma");
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ValidationError("ewma alpha must lie in (0, 1]");
  }
  Series out(s.size());
  out[0] = s[0];
  for (std::size_t i = 1; i < s.size(); ++i) {
    out[i] = alpha * s[i] + (1.0 - alpha) * out[i - 1];
  }
  return out;
}

Series median_filter(const Series& s, std::size_t w) {
  check_finite(s, "median_filter");
  check_window(w, s.size(), "median_filter");
  const std::size_t h = (w - 1) / 2;
  Series out(s.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(s.size() - 1, i + h);
    scratch.assign(s.begin() + static_cast<std::ptrdiff_t>(lo),
                   s.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    out[i] = median_of(scratch);
  }
  return out;
}

HampelResult hampel(const Series& s, std::size_t w, double n_sigma) {
  check_finite(s, "hampel");
  if (w < 3 || w % 2 == 0) {
    throw ValidationError("hampel needs an odd window >= 3");
  }
  if (w > s.size()) {
    throw ValidationError("hampel window exceeds series length");
  }
  if (!(n_sigma > 0.0)) {
    throw ValidationError("hampel n_sigma must be positive");
  }
  constexpr double kMadToSigma = 1.4826;
  const std::size_t h = (w - 1) / 2;

  HampelResult result;
  result.values = s;
  result.outlier_mask.assign(s.size(), 0);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(s.size() - 1, i + h);
    scratch.assign(s.begin() + static_cast<std::ptrdiff_t>(lo),
                   s.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const double m = median_of(scratch);
    for (double& v : scratch) v = std::abs(v - m);
    const double mad = median_of(scratch);
    if (std::abs(s[i] - m) > n_sigma * kMadToSigma * mad) {
      result.values[i] = m;
      result.outlier_mask[i] = 1;
    }
  }
  return result;
}

}  // namespace csisense
