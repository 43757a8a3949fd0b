#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "csisense/error.hpp"
#include "csisense/nn/autodiff.hpp"
#include "csisense/nn/losses.hpp"
#include "csisense/random.hpp"

using namespace csisense;
using nn::Tensor;
using nn::Value;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RandomStream& rng,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Brute-force contrastive loss: normalize rows, enumerate the full
// similarity matrix, average the per-anchor negative log ratios.
double nt_xent_oracle(const Tensor& z, double tau) {
  const std::size_t rows = z.rows();
  const std::size_t dim = z.cols();
  std::vector<std::vector<double>> zn(rows, std::vector<double>(dim));
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < dim; ++c) norm += z.at(r, c) * z.at(r, c);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < dim; ++c) zn[r][c] = z.at(r, c) / norm;
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t pos = k % 2 == 0 ? k + 1 : k - 1;
    double denom = 0.0;
    double num = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == k) continue;
      double sim = 0.0;
      for (std::size_t c = 0; c < dim; ++c) sim += zn[k][c] * zn[i][c];
      const double term = std::exp(sim / tau);
      denom += term;
      if (i == pos) num = term;
    }
    loss -= std::log(num / denom);
  }
  return loss / static_cast<double>(rows);
}

// Direct transcription of the cross-correlation loss: standardize columns
// (population statistics), then two explicit loops over the d x d matrix.
double barlow_twins_oracle(const Tensor& za, const Tensor& zb, double lambda) {
  const std::size_t batch = za.rows();
  const std::size_t dim = za.cols();
  auto standardized = [&](const Tensor& z) {
    std::vector<std::vector<double>> h(batch, std::vector<double>(dim));
    for (std::size_t c = 0; c < dim; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < batch; ++r) mean += z.at(r, c);
      mean /= static_cast<double>(batch);
      double var = 0.0;
      for (std::size_t r = 0; r < batch; ++r) {
        var += (z.at(r, c) - mean) * (z.at(r, c) - mean);
      }
      var /= static_cast<double>(batch);
      const double std_dev = std::sqrt(var);
      for (std::size_t r = 0; r < batch; ++r) {
        h[r][c] = (z.at(r, c) - mean) / std_dev;
      }
    }
    return h;
  };
  const auto ha = standardized(za);
  const auto hb = standardized(zb);
  double loss = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double num = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        num += ha[b][i] * hb[b][j];
        na += ha[b][i] * ha[b][i];
        nb += hb[b][j] * hb[b][j];
      }
      const double c = num / (std::sqrt(na) * std::sqrt(nb));
      if (i == j) {
        loss += (1.0 - c) * (1.0 - c);
      } else {
        loss += lambda * c * c;
      }
    }
  }
  return loss;
}

// Direct loops over the three decomposition terms, population statistics.
double vicreg_oracle(const Tensor& za, const Tensor& zb,
                     const nn::VicWeights& w) {
  const std::size_t batch = za.rows();
  const std::size_t dim = za.cols();
  double inv = 0.0;
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < dim; ++c) {
      const double d = za.at(r, c) - zb.at(r, c);
      inv += d * d;
    }
  inv /= static_cast<double>(batch);

  auto branch = [&](const Tensor& z, double& var_term, double& cov_term) {
    std::vector<double> mean(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::size_t r = 0; r < batch; ++r) mean[c] += z.at(r, c);
      mean[c] /= static_cast<double>(batch);
    }
    var_term = 0.0;
    cov_term = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        double cov = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
          cov += (z.at(r, i) - mean[i]) * (z.at(r, j) - mean[j]);
        }
        cov /= static_cast<double>(batch);
        if (i == j) {
          var_term += std::max(0.0, w.gamma - cov);
        } else {
          cov_term += cov * cov;
        }
      }
    }
  };
  double var_a = 0.0, cov_a = 0.0, var_b = 0.0, cov_b = 0.0;
  branch(za, var_a, cov_a);
  branch(zb, var_b, cov_b);
  return w.inv_weight * inv + w.var_weight * (var_a + var_b) +
         w.cov_weight * (cov_a + cov_b);
}

// B=4 columns that are exactly standardized and mutually orthogonal.
Tensor hadamard_embeddings(double scale) {
  return Tensor({4, 2}, {scale, scale, scale, -scale, -scale, scale, -scale,
                         -scale});
}

}  // namespace

TEST_SUITE_BEGIN("nn_losses");

TEST_CASE("nt_xent under total collapse equals log(2N-1)") {
  for (std::size_t n_pairs : {std::size_t{2}, std::size_t{4}}) {
    Tensor z({2 * n_pairs, 5});
    for (std::size_t r = 0; r < 2 * n_pairs; ++r)
      for (std::size_t c = 0; c < 5; ++c) z.at(r, c) = 0.3 * (c + 1.0);
    Value loss = nn::nt_xent(Value::constant(z), 0.5);
    const double want = std::log(2.0 * n_pairs - 1.0);
    CHECK(loss.tensor()[0] == doctest::Approx(want).epsilon(1e-9));
  }
  // N=2 collapse pins log 3.
  Tensor z({4, 3});
  z.fill(1.0);
  Value loss = nn::nt_xent(Value::constant(z), 0.5);
  CHECK(std::abs(loss.tensor()[0] - 1.0986122886681098) <= 1e-9);
}

TEST_CASE("nt_xent matches brute-force enumeration on random batches") {
  RandomStream rng(61);
  for (auto [rows, dim, tau] :
       {std::tuple<std::size_t, std::size_t, double>{4, 5, 0.5},
        {8, 3, 0.7},
        {6, 16, 0.2}}) {
    Tensor z = random_tensor({rows, dim}, rng, -1.5, 1.5);
    Value loss = nn::nt_xent(Value::constant(z.clone()), tau);
    CHECK(loss.tensor()[0] ==
          doctest::Approx(nt_xent_oracle(z, tau)).epsilon(1e-12));
  }
}

TEST_CASE("nt_xent ignores positive row-wise rescaling") {
  RandomStream rng(62);
  Tensor z = random_tensor({6, 8}, rng, -1.0, 1.0);
  Tensor scaled = z.clone();
  for (std::size_t r = 0; r < 6; ++r) {
    const double s = rng.uniform(0.2, 5.0);
    for (std::size_t c = 0; c < 8; ++c) scaled.at(r, c) *= s;
  }
  Value a = nn::nt_xent(Value::constant(z), 0.5);
  Value b = nn::nt_xent(Value::constant(scaled), 0.5);
  CHECK(a.tensor()[0] == doctest::Approx(b.tensor()[0]).epsilon(1e-12));
}

TEST_CASE("nt_xent validates its batch layout") {
  RandomStream rng(63);
  CHECK_THROWS_AS(nn::nt_xent(Value::constant(random_tensor({5, 4}, rng)),
                              0.5),
                  ValidationError);
  CHECK_THROWS_AS(nn::nt_xent(Value::constant(random_tensor({2, 4}, rng)),
                              0.5),
                  ValidationError);
  CHECK_THROWS_AS(nn::nt_xent(Value::constant(random_tensor({4, 4}, rng)),
                              0.0),
                  ValidationError);
}

TEST_CASE("simsiam loss hits -1 aligned and 0 orthogonal") {
  // Aligned: predictions are positively scaled copies of the targets.
  Tensor z({2, 3}, {1.0, 0.0, 0.0, 0.0, 2.0, 0.0});
  Tensor p = z.clone();
  for (std::size_t i = 0; i < p.numel(); ++i) p[i] *= 3.0;
  Value aligned = nn::simsiam_loss(
      Value::leaf(p.clone()), Value::constant(z.clone()),
      Value::leaf(p.clone()), Value::constant(z.clone()));
  CHECK(aligned.tensor()[0] == doctest::Approx(-1.0).epsilon(1e-12));

  // Orthogonal rows in both branches.
  Tensor q({2, 3}, {0.0, 0.0, 4.0, 1.0, 0.0, 0.0});
  Value orthogonal = nn::simsiam_loss(
      Value::leaf(q.clone()), Value::constant(z.clone()),
      Value::leaf(q.clone()), Value::constant(z.clone()));
  CHECK(orthogonal.tensor()[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("simsiam zero-norm rows contribute zero similarity with a warning") {
  Tensor p({2, 2}, {1.0, 0.0, 0.0, 0.0});
  Tensor z({2, 2}, {1.0, 0.0, 1.0, 0.0});
  std::vector<std::string> warnings;
  Value loss =
      nn::simsiam_loss(Value::leaf(p.clone()), Value::constant(z.clone()),
                       Value::leaf(p.clone()), Value::constant(z.clone()),
                       &warnings);
  // Each branch: (cos=1 for row 0, 0 for the zero row) / 2.
  CHECK(loss.tensor()[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(warnings.size() == 2);
}

TEST_CASE("simsiam demands stop-gradient targets and leaves them untouched") {
  RandomStream rng(64);
  Value z1 = Value::leaf(random_tensor({3, 4}, rng, 0.2, 1.0));
  Value z2 = Value::leaf(random_tensor({3, 4}, rng, 0.2, 1.0));
  Value p1 = Value::leaf(random_tensor({3, 4}, rng, 0.2, 1.0));
  Value p2 = Value::leaf(random_tensor({3, 4}, rng, 0.2, 1.0));

  CHECK_THROWS_AS(nn::simsiam_loss(p1, z2, p2, z1), ValidationError);

  Value loss = nn::simsiam_loss(p1, z2.detach(), p2, z1.detach());
  nn::backward(loss);
  CHECK(z1.grad().numel() == 0);  // never reached by the sweep
  CHECK(z2.grad().numel() == 0);
  REQUIRE(p1.grad().numel() == 12);
  bool nonzero = false;
  for (std::size_t i = 0; i < 12; ++i) {
    nonzero = nonzero || p1.grad()[i] != 0.0;
  }
  CHECK(nonzero);
}

TEST_CASE("barlow twins vanishes on decorrelated identical branches") {
  Tensor z = hadamard_embeddings(1.0);
  Value loss = nn::barlow_twins_loss(Value::constant(z.clone()),
                                     Value::constant(z.clone()), 5e-3);
  CHECK(loss.tensor()[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("barlow twins matches the two-loop oracle") {
  RandomStream rng(65);
  Tensor za = random_tensor({8, 4}, rng, -2.0, 2.0);
  Tensor zb = random_tensor({8, 4}, rng, -2.0, 2.0);
  for (double lambda : {5e-3, 0.0, 0.3}) {
    Value loss = nn::barlow_twins_loss(Value::constant(za.clone()),
                                       Value::constant(zb.clone()), lambda);
    CHECK(loss.tensor()[0] ==
          doctest::Approx(barlow_twins_oracle(za, zb, lambda)).epsilon(1e-8));
  }
}

TEST_CASE("barlow twins with lambda zero keeps only the invariance term") {
  RandomStream rng(66);
  Tensor za = random_tensor({6, 3}, rng);
  Tensor zb = random_tensor({6, 3}, rng);
  Value loss = nn::barlow_twins_loss(Value::constant(za.clone()),
                                     Value::constant(zb.clone()), 0.0);
  // Manually: only sum_i (1 - C_ii)^2 remains.
  const double full = barlow_twins_oracle(za, zb, 0.0);
  CHECK(loss.tensor()[0] == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("barlow twins rejects zero-variance dimensions") {
  Tensor za({4, 2}, {1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0});
  Tensor zb = za.clone();
  CHECK_THROWS_AS(nn::barlow_twins_loss(Value::constant(za),
                                        Value::constant(zb), 5e-3),
                  NumericError);
}

TEST_CASE("vicreg vanishes on its fixed point") {
  // Identical branches, per-dimension variance above gamma, orthogonal
  // columns: every term is exactly zero.
  Tensor z = hadamard_embeddings(1.1);
  nn::VicWeights w;
  auto terms = nn::vicreg_loss(Value::constant(z.clone()),
                               Value::constant(z.clone()), w);
  CHECK(terms.total.tensor()[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(terms.invariance == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(terms.variance_a == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(terms.covariance_a == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("vicreg collapse puts the variance hinge at d * gamma per branch") {
  Tensor z({5, 3});
  for (std::size_t r = 0; r < 5; ++r) {
    z.at(r, 0) = 0.7;
    z.at(r, 1) = -0.2;
    z.at(r, 2) = 1.4;
  }
  nn::VicWeights w;
  auto terms = nn::vicreg_loss(Value::constant(z.clone()),
                               Value::constant(z.clone()), w);
  CHECK(terms.variance_a == doctest::Approx(3.0 * w.gamma).epsilon(1e-12));
  CHECK(terms.variance_b == doctest::Approx(3.0 * w.gamma).epsilon(1e-12));
  CHECK(terms.invariance == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(terms.total.tensor()[0] ==
        doctest::Approx(2.0 * w.var_weight * 3.0 * w.gamma).epsilon(1e-9));
}

TEST_CASE("vicreg matches the covariance-loop oracle") {
  RandomStream rng(67);
  Tensor za = random_tensor({6, 5}, rng, -2.0, 2.0);
  Tensor zb = random_tensor({6, 5}, rng, -2.0, 2.0);
  nn::VicWeights w;
  auto terms = nn::vicreg_loss(Value::constant(za.clone()),
                               Value::constant(zb.clone()), w);
  CHECK(terms.total.tensor()[0] ==
        doctest::Approx(vicreg_oracle(za, zb, w)).epsilon(1e-8));

  nn::VicWeights skewed{0.5, 3.0, 2.0, 1.7};
  auto skewed_terms = nn::vicreg_loss(Value::constant(za.clone()),
                                      Value::constant(zb.clone()), skewed);
  CHECK(skewed_terms.total.tensor()[0] ==
        doctest::Approx(vicreg_oracle(za, zb, skewed)).epsilon(1e-8));
}

TEST_CASE("loss configs validate their hyperparameters") {
  nn::SslLossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.temperature == 0.5);
  CHECK(cfg.bt_lambda == 5e-3);
  CHECK(cfg.vic.inv_weight == 1.0);
  CHECK(cfg.vic.var_weight == 25.0);
  CHECK(cfg.vic.cov_weight == 1.0);
  CHECK(cfg.vic.gamma == 1.0);

  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.bt_lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.vic.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  CHECK(std::string(nn::ssl_algorithm_name(nn::SslAlgorithm::simclr)) ==
        "simclr");
  CHECK(nn::ssl_algorithm_from_name("vicreg") == nn::SslAlgorithm::vicreg);
  CHECK_THROWS_AS(nn::ssl_algorithm_from_name("moco"), ValidationError);
}

TEST_CASE("mismatched or tiny batches are rejected by every loss") {
  RandomStream rng(68);
  Value a = Value::constant(random_tensor({4, 3}, rng));
  Value b = Value::constant(random_tensor({4, 2}, rng));
  Value tiny = Value::constant(random_tensor({1, 3}, rng));
  CHECK_THROWS_AS(nn::barlow_twins_loss(a, b, 5e-3), ValidationError);
  CHECK_THROWS_AS(nn::vicreg_loss(a, b, nn::VicWeights{}), ValidationError);
  CHECK_THROWS_AS(nn::vicreg_loss(tiny, tiny, nn::VicWeights{}),
                  ValidationError);
  CHECK_THROWS_AS(nn::simsiam_loss(a, b, a, b), ValidationError);
}

TEST_SUITE_END();
