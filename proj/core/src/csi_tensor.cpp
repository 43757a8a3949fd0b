#include "csisense/csi_tensor.hpp"

#include <cmath>
#include <numbers>

#include "csisense/error.hpp"

namespace csisense {

RealField::RealField(std::size_t t_, std::size_t s_, std::size_t m_,
                     std::size_t n_)
    : t(t_), s(s_), m(m_), n(n_), data(t_ * s_ * m_ * n_, 0.0) {}

CsiTensor::CsiTensor(std::size_t t, std::size_t s, std::size_t m,
                     std::size_t n)
    : t_(t), s_(s), m_(m), n_(n), data_(t * s * m * n) {}

void CsiTensor::validate() const {
  if (t_ == 0 || s_ == 0 || m_ == 0 || n_ == 0) {
    throw ValidationError("CsiTensor has a zero dimension (t=" +
                          std::to_string(t_) + " s=" + std::to_string(s_) +
                          " m=" + std::to_string(m_) +
                          " n=" + std::to_string(n_) + ")");
  }
  if (data_.size() != size()) {
    throw ValidationError("CsiTensor payload has " +
                          std::to_string(data_.size()) +
                          " entries, expected " + std::to_string(size()));
  }
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    throw ValidationError("CsiTensor sample_interval must be positive and "
                          "finite, got " +
                          std::to_string(sample_interval));
  }
  if (carrier_freqs.size() != s_) {
    throw ValidationError("CsiTensor has " +
                          std::to_string(carrier_freqs.size()) +
                          " carrier frequencies for " + std::to_string(s_) +
                          " subcarriers");
  }
  for (double f : carrier_freqs) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ValidationError("CsiTensor carrier frequency must be positive "
                            "and finite, got " +
                            std::to_string(f));
    }
  }
  for (const auto& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw ValidationError("CsiTensor payload contains a non-finite value");
    }
  }
}

double wrap_phase(double radians) {
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(radians, two_pi);
  if (w <= -pi) w += two_pi;
  if (w > pi) w -= two_pi;
  return w;
}

AmpPhaseView split_amp_phase(const CsiTensor& tensor) {
  AmpPhaseView view;
  view.amplitude = RealField(tensor.t(), tensor.s(), tensor.m(), tensor.n());
  view.phase = RealField(tensor.t(), tensor.s(), tensor.m(), tensor.n());
  const auto& z = tensor.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    view.amplitude.data[i] = std::abs(z[i]);
    // std::arg returns [-pi, pi]; fold the -pi edge onto +pi so the
    // canonical range is (-pi, pi].
    double p = std::arg(z[i]);
    if (p == -std::numbers::pi) p = std::numbers::pi;
    view.phase.data[i] = p;
  }
  return view;
}

CsiTensor merge_amp_phase(const AmpPhaseView& view, const CsiTensor& like) {
  const RealField& a = view.amplitude;
  const RealField& p = view.phase;
  if (a.t != p.t || a.s != p.s || a.m != p.m || a.n != p.n) {
    throw ValidationError("amplitude and phase fields disagree on shape");
  }
  CsiTensor out(a.t, a.s, a.m, a.n);
  out.sample_interval = like.sample_interval;
  out.carrier_freqs = like.carrier_freqs;
  out.meta = like.meta;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = std::polar(a.data[i], p.data[i]);
  }
  return out;
}

}  // namespace csisense
