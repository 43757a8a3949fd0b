#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace csisense {

// Dense real-valued field with the same (time, subcarrier, rx, tx) layout as
// a CsiTensor.  Used for amplitude / phase views and derived per-entry stats.
struct RealField {
  std::size_t t = 0, s = 0, m = 0, n = 0;
  std::vector<double> data;  // row-major in (t, s, m, n)

  RealField() = default;
  RealField(std::size_t t_, std::size_t s_, std::size_t m_, std::size_t n_);

  std::size_t size() const { return t * s * m * n; }
  std::size_t index(std::size_t ti, std::size_t si, std::size_t mi,
                    std::size_t ni) const {
    return ((ti * s + si) * m + mi) * n + ni;
  }
  double& at(std::size_t ti, std::size_t si, std::size_t mi, std::size_t ni) {
    return data[index(ti, si, mi, ni)];
  }
  double at(std::size_t ti, std::size_t si, std::size_t mi,
            std::size_t ni) const {
    return data[index(ti, si, mi, ni)];
  }
};

struct AmpPhaseView {
  RealField amplitude;
  RealField phase;  // canonical range (-pi, pi]
};

// Channel state information across time, subcarriers and antenna pairs.
// data is row-major in (t, s, m, n): t slowest, n fastest.
class CsiTensor {
 public:
  CsiTensor() = default;
  CsiTensor(std::size_t t, std::size_t s, std::size_t m, std::size_t n);

  std::size_t t() const { return t_; }
  std::size_t s() const { return s_; }
  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  std::size_t size() const { return t_ * s_ * m_ * n_; }

  std::size_t index(std::size_t ti, std::size_t si, std::size_t mi,
                    std::size_t ni) const {
    return ((ti * s_ + si) * m_ + mi) * n_ + ni;
  }
  std::complex<double>& at(std::size_t ti, std::size_t si, std::size_t mi,
                           std::size_t ni) {
    return data_[index(ti, si, mi, ni)];
  }
  const std::complex<double>& at(std::size_t ti, std::size_t si,
                                 std::size_t mi, std::size_t ni) const {
    return data_[index(ti, si, mi, ni)];
  }

  std::vector<std::complex<double>>& data() { return data_; }
  const std::vector<std::complex<double>>& data() const { return data_; }

  // Seconds between consecutive time samples.
  double sample_interval = 0.0;
  // Center frequency of each subcarrier in Hz; must have s() entries.
  std::vector<double> carrier_freqs;
  // Free-form annotations carried through the container format.
  std::map<std::string, std::string> meta;

  // Throws ValidationError if dims, payload, sample_interval or
  // carrier_freqs are inconsistent or non-finite.
  void validate() const;

  bool same_shape(const CsiTensor& other) const {
    return t_ == other.t_ && s_ == other.s_ && m_ == other.m_ &&
           n_ == other.n_;
  }

 private:
  std::size_t t_ = 0, s_ = 0, m_ = 0, n_ = 0;
  std::vector<std::complex<double>> data_;
};

// Canonicalize an angle into (-pi, pi].
double wrap_phase(double radians);

// Elementwise |z| and arg(z) with phases in (-pi, pi].
AmpPhaseView split_amp_phase(const CsiTensor& tensor);

// Rebuild a complex tensor from amplitude and phase fields; shape metadata
// (sample_interval, carrier_freqs, meta) is copied from `like`.
CsiTensor merge_amp_phase(const AmpPhaseView& view, const CsiTensor& like);

}  // namespace csisense
