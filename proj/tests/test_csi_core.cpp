#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "csisense/csi_tensor.hpp"
#include "csisense/csit_io.hpp"
#include "csisense/error.hpp"
#include "csisense/random.hpp"

using namespace csisense;

namespace {

CsiTensor random_tensor(std::size_t t, std::size_t s, std::size_t m,
                        std::size_t n, RandomStream& rng) {
  CsiTensor x(t, s, m, n);
  x.sample_interval = 0.001 + rng.uniform();
  x.carrier_freqs.resize(s);
  for (auto& f : x.carrier_freqs) f = 5.0e9 + 1.0e6 * rng.uniform();
  for (auto& z : x.data()) z = {rng.gaussian(), rng.gaussian()};
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("csi_core");

TEST_CASE("random stream is deterministic and matches frozen values") {
  RandomStream a(42), b(42);
  // Frozen from an independent reimplementation of the generator.
  CHECK(a.next_u64() == 0xd5bec6a6293ddc4cULL);
  CHECK(a.next_u64() == 0x351b5898c36afd67ULL);
  CHECK(a.next_u64() == 0x03215464176d49adULL);
  CHECK(a.next_u64() == 0x555aeeab230986baULL);
  CHECK(b.uniform() == doctest::Approx(0.8349422603289364).epsilon(1e-15));

  RandomStream c(42, 1);
  CHECK(c.next_u64() == 0x5673be346681a8b4ULL);
}

TEST_CASE("random stream fork is independent of parent state") {
  RandomStream parent(42);
  RandomStream f1 = parent.fork(7);
  // Forking must not consume parent state.
  CHECK(parent.next_u64() == 0xd5bec6a6293ddc4cULL);
  CHECK(f1.next_u64() == 0x52e695d61a8c1bb8ULL);
  // Same fork id reproduces the same substream; different ids differ.
  RandomStream f2 = parent.fork(7);
  RandomStream f3 = parent.fork(8);
  CHECK(f2.next_u64() == 0x52e695d61a8c1bb8ULL);
  CHECK(f3.next_u64() != 0x52e695d61a8c1bb8ULL);
}

TEST_CASE("uniform stays in [0,1) and gaussian has sane moments") {
  RandomStream rng(7);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("next_below respects the bound") {
  RandomStream rng(3);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.next_below(7) < 7);
  }
  CHECK(rng.next_below(1) == 0);
}

TEST_CASE("tensor layout is row-major in (t, s, m, n)") {
  CsiTensor x(2, 3, 2, 2);
  for (std::size_t ti = 0; ti < 2; ++ti)
    for (std::size_t si = 0; si < 3; ++si)
      for (std::size_t mi = 0; mi < 2; ++mi)
        for (std::size_t ni = 0; ni < 2; ++ni)
          x.at(ti, si, mi, ni) = {double(ti * 100 + si * 10 + mi * 2 + ni), 0};
  // n fastest, then m, then s, then t.
  CHECK(x.data()[0].real() == 0.0);
  CHECK(x.data()[1].real() == 1.0);
  CHECK(x.data()[2].real() == 2.0);
  CHECK(x.data()[4].real() == 10.0);
  CHECK(x.data()[12].real() == 100.0);
  CHECK(x.index(1, 2, 1, 1) == x.size() - 1);
}

TEST_CASE("validate rejects inconsistent tensors") {
  RandomStream rng(1);
  CsiTensor good = random_tensor(2, 2, 1, 1, rng);
  CHECK_NOTHROW(good.validate());

  CsiTensor zero_dim;
  CHECK_THROWS_AS(zero_dim.validate(), ValidationError);

  CsiTensor bad_dt = good;
  bad_dt.sample_interval = 0.0;
  CHECK_THROWS_AS(bad_dt.validate(), ValidationError);

  CsiTensor bad_freqs = good;
  bad_freqs.carrier_freqs.pop_back();
  CHECK_THROWS_AS(bad_freqs.validate(), ValidationError);

  CsiTensor neg_freq = good;
  neg_freq.carrier_freqs[0] = -5.0e9;
  CHECK_THROWS_AS(neg_freq.validate(), ValidationError);

  CsiTensor nan_payload = good;
  nan_payload.data()[1] = {std::nan(""), 0.0};
  CHECK_THROWS_AS(nan_payload.validate(), ValidationError);
}

TEST_CASE("wrap_phase canonicalizes into (-pi, pi]") {
  constexpr double pi = std::numbers::pi;
  CHECK(wrap_phase(0.0) == 0.0);
  CHECK(wrap_phase(pi) == pi);
  CHECK(wrap_phase(-pi) == pi);
  CHECK(wrap_phase(3.0 * pi) == doctest::Approx(pi).epsilon(1e-12));
  CHECK(wrap_phase(-1.5 * pi) == doctest::Approx(0.5 * pi).epsilon(1e-12));
  CHECK(std::abs(wrap_phase(2.0 * pi)) < 1e-12);
}

TEST_CASE("split_amp_phase on axis-aligned entries") {
  CsiTensor x(1, 1, 1, 2);
  x.sample_interval = 0.01;
  x.carrier_freqs = {5.8e9};
  x.at(0, 0, 0, 0) = {1.0, 0.0};
  x.at(0, 0, 0, 1) = {0.0, -2.0};
  const AmpPhaseView v = split_amp_phase(x);
  CHECK(v.amplitude.at(0, 0, 0, 0) == 1.0);
  CHECK(v.phase.at(0, 0, 0, 0) == 0.0);
  CHECK(v.amplitude.at(0, 0, 0, 1) == 2.0);
  CHECK(v.phase.at(0, 0, 0, 1) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("split_amp_phase round-trips a random 4x8x2x1 tensor") {
  RandomStream rng(11);
  const CsiTensor x = random_tensor(4, 8, 2, 1, rng);
  const AmpPhaseView v = split_amp_phase(x);
  for (std::size_t i = 0; i < v.phase.data.size(); ++i) {
    CHECK(v.phase.data[i] > -std::numbers::pi);
    CHECK(v.phase.data[i] <= std::numbers::pi);
  }
  const CsiTensor back = merge_amp_phase(v, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(back.data()[i] - x.data()[i]) <=
          1e-12 * std::max(1.0, std::abs(x.data()[i])));
  }
}

TEST_CASE("minimal container has the documented byte layout") {
  CsiTensor x(1, 1, 1, 1);
  x.sample_interval = 0.01;
  x.carrier_freqs = {5.8e9};
  x.at(0, 0, 0, 0) = {0.0, 0.0};

  const auto bytes = serialize_csit(x);
  // magic(4) + version(2) + dims(16) + dt(8) + 1 freq(8) = 38 byte header,
  // 16 byte payload, u32 meta length + "{}" = 6 bytes.
  REQUIRE(bytes.size() == 60);
  CHECK(std::memcmp(bytes.data(), "CSIT", 4) == 0);
  CHECK(bytes[4] == 1);  // version u16 little-endian
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);  // T
  CHECK(bytes[10] == 1); // S
  CHECK(bytes[14] == 1); // M
  CHECK(bytes[18] == 1); // N
  CHECK(bytes[54] == 2); // meta length
  CHECK(bytes[58] == '{');
  CHECK(bytes[59] == '}');
}

TEST_CASE("container round-trip is bit-exact on random tensors") {
  RandomStream rng(99);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t t = 1 + rng.next_below(6);
    const std::size_t s = 1 + rng.next_below(8);
    const std::size_t m = 1 + rng.next_below(3);
    const std::size_t n = 1 + rng.next_below(2);
    CsiTensor x = random_tensor(t, s, m, n, rng);
    x.meta["label"] = std::to_string(trial);
    x.meta["note"] = "round trip";

    const auto bytes = serialize_csit(x);
    const CsiTensor y = parse_csit(bytes.data(), bytes.size());

    REQUIRE(y.same_shape(x));
    CHECK(std::memcmp(y.data().data(), x.data().data(),
                      x.size() * sizeof(std::complex<double>)) == 0);
    CHECK(std::memcmp(y.carrier_freqs.data(), x.carrier_freqs.data(),
                      s * sizeof(double)) == 0);
    CHECK(y.sample_interval == x.sample_interval);
    CHECK(y.meta == x.meta);
  }
}

TEST_CASE("stream write reports byte count and read parses it back") {
  RandomStream rng(5);
  CsiTensor x = random_tensor(3, 4, 2, 1, rng);
  x.meta["k"] = "v";
  std::stringstream buf;
  const std::size_t written = write_csit(x, buf);
  CHECK(written == serialize_csit(x).size());
  const CsiTensor y = read_csit(buf);
  CHECK(y.same_shape(x));
  CHECK(y.data() == x.data());
  CHECK(y.meta == x.meta);
}

TEST_CASE("corrupt containers are rejected") {
  RandomStream rng(8);
  const CsiTensor x = random_tensor(2, 2, 1, 1, rng);
  const auto good = serialize_csit(x);

  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] = 'X';
    CHECK_THROWS_AS(parse_csit(bad.data(), bad.size()), FormatError);
  }
  SUBCASE("unsupported version") {
    auto bad = good;
    bad[4] = 2;
    CHECK_THROWS_WITH_AS(parse_csit(bad.data(), bad.size()),
                         doctest::Contains("unsupported version"),
                         FormatError);
  }
  SUBCASE("zero dimension") {
    auto bad = good;
    bad[6] = bad[7] = bad[8] = bad[9] = 0;  // T = 0
    CHECK_THROWS_AS(parse_csit(bad.data(), bad.size()), FormatError);
  }
  SUBCASE("truncated payload reports the EOF offset") {
    const std::size_t cut = good.size() / 2;
    try {
      parse_csit(good.data(), cut);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(e.offset() == cut);
      CHECK(std::string(e.what()).find("unexpected EOF at offset") !=
            std::string::npos);
    }
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(0);
    CHECK_THROWS_WITH_AS(parse_csit(bad.data(), bad.size()),
                         doctest::Contains("trailing"), FormatError);
  }
  SUBCASE("dim overflow is caught before allocation") {
    auto bad = good;
    for (int i = 6; i < 22; ++i) bad[i] = 0xFF;  // all four dims huge
    CHECK_THROWS_WITH_AS(parse_csit(bad.data(), bad.size()),
                         doctest::Contains("overflow"), FormatError);
  }
  SUBCASE("non-finite payload") {
    auto bad = good;
    // First payload double sits right after the 38+16-byte header+freqs.
    const std::size_t payload = 38 + 8 * x.s();
    const std::uint64_t nan_bits = 0x7FF8000000000000ULL;
    for (int i = 0; i < 8; ++i)
      bad[payload + i] = static_cast<std::uint8_t>(nan_bits >> (8 * i));
    CHECK_THROWS_WITH_AS(parse_csit(bad.data(), bad.size()),
                         doctest::Contains("non-finite"), FormatError);
  }
  SUBCASE("metadata must be a JSON object of strings") {
    CsiTensor t = x;
    std::stringstream buf;
    write_csit(t, buf);
    std::string raw = buf.str();
    // Rewrite the meta section ("{}" by default) as a JSON array.
    raw[raw.size() - 2] = '[';
    raw[raw.size() - 1] = ']';
    CHECK_THROWS_AS(
        parse_csit(reinterpret_cast<const std::uint8_t*>(raw.data()),
                   raw.size()),
        FormatError);
  }
}

TEST_SUITE_END();
