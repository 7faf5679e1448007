// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "edgespeech/core/error.hpp"
#include "edgespeech/core/rng.hpp"
#include "edgespeech/losses/losses.hpp"

using namespace edgespeech;
using namespace edgespeech::autodiff;
using namespace edgespeech::losses;

namespace {

// one-term CPC loss with H=1, identity predictor: score of row r is r * c_t
double cpc_scalar_case(const std::vector<double>& rows, double context,
                       bool include_positive = true) {
  Graph g;
  std::vector<double> flat = rows;
  const size_t n = rows.size();
  NodeId z = g.constant(Tensor({n, 1}, std::move(flat)));
  NodeId c = g.constant(Tensor({1, 1}, {context}));
  NodeId w = g.constant(Tensor::matrix(1, 1, {1.0}));
  CandidateSet cs;
  cs.t = 0;
  cs.k = 1;
  cs.include_positive = include_positive;
  for (size_t i = 0; i < n; ++i) cs.rows.push_back(static_cast<uint32_t>(i));
  NodeId loss = cpc_loss(g, z, c, {w}, {cs});
  g.forward();
  return g.value(loss).data[0];
}

}  // namespace

TEST_CASE("cpc: all scores equal with a set of 8 gives ln 8") {
  std::vector<double> rows(8, 0.7);
  CHECK(cpc_scalar_case(rows, 1.3) == doctest::Approx(std::log(8.0)));
}

TEST_CASE("cpc: positive 10 vs two zero negatives") {
  // -ln(e^10 / (e^10 + 2))
  double expected = -std::log(std::exp(10.0) / (std::exp(10.0) + 2.0));
  CHECK(cpc_scalar_case({10.0, 0.0, 0.0}, 1.0) ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(9.08e-5).epsilon(1e-2));
}

TEST_CASE("cpc: raising the positive score strictly lowers the loss") {
  double prev = cpc_scalar_case({0.5, 1.0, -0.3}, 1.0);
  for (double s : {0.8, 1.5, 3.0, 6.0}) {
    double cur = cpc_scalar_case({s, 1.0, -0.3}, 1.0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("cpc: non-negative under the inclusive convention") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rows(2 + rng.uniform_int(8));
    for (auto& r : rows) r = rng.uniform(-3, 3);
    CHECK(cpc_scalar_case(rows, rng.uniform(-2, 2)) >= 0.0);
  }
}

TEST_CASE("cpc: exclusive denominator can go negative but stays finite") {
  // positive score far above the negatives drives lse(negs) - pos below 0
  double v = cpc_scalar_case({5.0, 0.0, 0.0}, 1.0, false);
  CHECK(v < 0.0);
  CHECK(std::isfinite(v));
}

TEST_CASE("cpc: empty negative set rejected") {
  Graph g;
  NodeId z = g.constant(Tensor::matrix(2, 1, {1.0, 0.0}));
  NodeId c = g.constant(Tensor::matrix(1, 1, {1.0}));
  NodeId w = g.constant(Tensor::matrix(1, 1, {1.0}));
  CandidateSet cs;
  cs.rows = {0};  // no negatives
  CHECK_THROWS_WITH_AS(cpc_loss(g, z, c, {w}, {cs}),
                       doctest::Contains("empty negative set"), Error);
}

TEST_CASE("cpc: sampler contract") {
  Rng rng(11);
  CpcLossConfig cfg;
  cfg.horizon = 4;
  cfg.n_neg = 10;
  auto terms = sample_negatives(5, 20, 40, cfg, rng);
  CHECK(terms.size() == (20 - 4) * 4);
  for (const auto& cs : terms) {
    CHECK(cs.rows.size() == 11);
    CHECK(cs.rows[0] == 5 + cs.t + cs.k);  // positive first
    for (size_t i = 1; i < cs.rows.size(); ++i) {
      CHECK(cs.rows[i] < 40);
      CHECK(cs.rows[i] != cs.rows[0]);
    }
  }
  // too-short sequence yields no terms
  CHECK(sample_negatives(0, 4, 40, cfg, rng).empty());
}

namespace {

struct VqCase {
  Graph g;
  NodeId x, recon, ze, vq, cb;
  VqLossParts parts;
};

}  // namespace

TEST_CASE("vqvae: z_e equal to codes leaves only the reconstruction term") {
  Graph g;
  NodeId x = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  NodeId recon = g.constant(Tensor::matrix(2, 3, {1, 2, 2, 4, 5, 6}));
  NodeId cb = g.param("cb", Tensor::matrix(2, 2, {0.5, 0.5, -1, -1}));
  NodeId ze = g.constant(Tensor::matrix(2, 2, {0.5, 0.5, -1, -1}));
  NodeId vq = g.vq_quantize(ze, cb);
  auto parts = vqvae_loss(g, x, recon, ze, vq, cb, {});
  g.forward();
  CHECK(g.value(parts.codebook_term).data[0] == 0.0);
  CHECK(g.value(parts.commitment_term).data[0] == 0.0);
  CHECK(g.value(parts.total).data[0] ==
        doctest::Approx(g.value(parts.reconstruction).data[0]));
  CHECK(g.value(parts.reconstruction).data[0] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("vqvae: single frame arithmetic r + 1 + 0.25") {
  Graph g;
  NodeId x = g.constant(Tensor::matrix(1, 2, {2, 2}));
  NodeId recon = g.constant(Tensor::matrix(1, 2, {1, 2}));  // r = 0.5
  NodeId cb = g.param("cb", Tensor::matrix(1, 2, {0, 0}));
  NodeId ze = g.constant(Tensor::matrix(1, 2, {1, 0}));
  NodeId vq = g.vq_quantize(ze, cb);
  VqLossConfig cfg;
  cfg.beta = 0.25;
  auto parts = vqvae_loss(g, x, recon, ze, vq, cb, cfg);
  g.forward();
  const double r = 0.5;
  CHECK(g.value(parts.total).data[0] == doctest::Approx(r + 1.0 + 0.25));
}

TEST_CASE("vqvae: beta 0 removes the z_e gradient from the VQ terms") {
  Rng rng(3);
  Graph g;
  NodeId ze = g.input("ze", {3, 2});
  NodeId cb = g.param("cb", Tensor::uniform({4, 2}, rng, -1, 1));
  NodeId vq = g.vq_quantize(ze, cb);
  NodeId cq = g.codebook_lookup(cb, vq);
  VqLossConfig cfg;
  cfg.beta = 0.0;
  // VQ terms only: codebook + commitment
  NodeId vq_terms =
      g.add(g.mean(g.l2sq_rows(g.stop_grad(ze), cq)),
            g.scale(g.mean(g.l2sq_rows(ze, g.stop_grad(cq))), cfg.beta));
  g.set_input("ze", Tensor::uniform({3, 2}, rng, -1, 1));
  g.forward();
  g.backward(vq_terms);
  CHECK(g.grad(ze).data == std::vector<double>(6, 0.0));
}

TEST_CASE("vqvae: full loss gradient matches finite differences") {
  Rng rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    size_t t = 2 + rng.uniform_int(3), d = 2, f = 3;
    NodeId ze = g.input("ze", {t, d});
    NodeId cb = g.param("cb", Tensor::uniform({5, d}, rng, -1, 1));
    NodeId dec_w = g.param("dec_w", Tensor::uniform({d, f}, rng, -1, 1));
    NodeId x = g.constant(Tensor::uniform({t, f}, rng, -1, 1));
    NodeId vq = g.vq_quantize(ze, cb);
    NodeId recon = g.matmul(vq, dec_w);  // straight-through into the decoder
    auto parts = vqvae_loss(g, x, recon, ze, vq, cb, {});
    Tensor zev = Tensor::uniform({t, d}, rng, -1, 1);
    g.set_input("ze", zev);
    g.forward();
    auto grads = g.backward(parts.total);
    Tensor ze_grad = g.grad(ze);

    g.freeze_quantizers();
    auto f_ze = [&](const Tensor& probe) {
      g.set_input("ze", probe);
      g.forward();
      return g.value(parts.total).data[0];
    };
    CHECK(max_rel_err(ze_grad, finite_difference_gradient(f_ze, zev, 1e-5)) <
          1e-4);
    g.set_input("ze", zev);
    auto f_cb = [&](const Tensor& probe) {
      g.set_param("cb", probe);
      g.forward();
      return g.value(parts.total).data[0];
    };
    Tensor cb_val = g.param_value("cb");
    CHECK(max_rel_err(grads.param_grads.at("cb"),
                      finite_difference_gradient(f_cb, cb_val, 1e-5)) < 1e-4);
    g.unfreeze_quantizers();
  }
}

TEST_CASE("triplet: identical embeddings give the margin") {
  Graph g;
  Tensor e = Tensor::uniform({1, 8}, *(new Rng(1)), -1, 1);
  NodeId a = g.constant(e), p = g.constant(e), n = g.constant(e);
  TripletConfig cfg;
  cfg.margin = 0.5;
  NodeId loss = triplet_term(g, a, p, n, cfg);
  g.forward();
  CHECK(g.value(loss).data[0] == doctest::Approx(0.5));
}

TEST_CASE("triplet: hinge arithmetic") {
  TripletConfig cfg;
  cfg.margin = 0.5;
  // d2_pos = 1, d2_neg = 2 -> max(0, 1-2+0.5) = 0
  {
    Graph g;
    NodeId a = g.constant(Tensor::matrix(1, 2, {0, 0}));
    NodeId p = g.constant(Tensor::matrix(1, 2, {1, 0}));
    NodeId n = g.constant(Tensor::matrix(1, 2, {1, 1}));
    NodeId loss = triplet_term(g, a, p, n, cfg);
    g.forward();
    CHECK(g.value(loss).data[0] == 0.0);
  }
  // d2_pos = 2, d2_neg = 1 -> 1.5
  {
    Graph g;
    NodeId a = g.constant(Tensor::matrix(1, 2, {0, 0}));
    NodeId p = g.constant(Tensor::matrix(1, 2, {1, 1}));
    NodeId n = g.constant(Tensor::matrix(1, 2, {1, 0}));
    NodeId loss = triplet_term(g, a, p, n, cfg);
    g.forward();
    CHECK(g.value(loss).data[0] == doctest::Approx(1.5));
  }
}

TEST_CASE("triplet: invariant under a common rotation") {
  Rng rng(17);
  // random 2-D rotation applied to all three embeddings
  double theta = rng.uniform(0, 6.28);
  double rot[4] = {std::cos(theta), -std::sin(theta), std::sin(theta),
                   std::cos(theta)};
  auto rotate = [&](const Tensor& v) {
    Tensor out = Tensor::zeros({1, 2});
    out.data[0] = rot[0] * v.data[0] + rot[1] * v.data[1];
    out.data[1] = rot[2] * v.data[0] + rot[3] * v.data[1];
    return out;
  };
  for (int trial = 0; trial < 20; ++trial) {
    Tensor av = Tensor::uniform({1, 2}, rng, -1, 1);
    Tensor pv = Tensor::uniform({1, 2}, rng, -1, 1);
    Tensor nv = Tensor::uniform({1, 2}, rng, -1, 1);
    TripletConfig cfg;
    double base, rotated;
    {
      Graph g;
      NodeId loss = triplet_term(g, g.constant(av), g.constant(pv),
                                 g.constant(nv), cfg);
      g.forward();
      base = g.value(loss).data[0];
    }
    {
      Graph g;
      NodeId loss = triplet_term(g, g.constant(rotate(av)),
                                 g.constant(rotate(pv)),
                                 g.constant(rotate(nv)), cfg);
      g.forward();
      rotated = g.value(loss).data[0];
    }
    CHECK(base == doctest::Approx(rotated).epsilon(1e-12));
  }
}

TEST_CASE("distill: student equal to teacher with alpha 0 gives 0") {
  Graph g;
  Tensor teacher = Tensor::matrix(2, 3, {1, 2, 3, -1, 0, 1});
  NodeId student = g.constant(teacher);
  DistillConfig cfg;
  cfg.alpha = 0.0;
  NodeId loss = distill_loss(g, student, teacher, {0, 1}, cfg);
  g.forward();
  CHECK(g.value(loss).data[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("distill: uniform teacher and student give 0 for any T") {
  for (double t : {0.5, 1.0, 4.0, 10.0}) {
    Graph g;
    Tensor teacher = Tensor::matrix(1, 4, {2, 2, 2, 2});
    NodeId student = g.constant(Tensor::matrix(1, 4, {7, 7, 7, 7}));
    DistillConfig cfg;
    cfg.alpha = 0.0;
    cfg.temperature = t;
    NodeId loss = distill_loss(g, student, teacher, {0}, cfg);
    g.forward();
    CHECK(g.value(loss).data[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("distill: teacher (2,0) vs student (0,0) at T=1, alpha=0") {
  // independent arithmetic: p = softmax(2,0), q = (1/2,1/2),
  // KL(p||q) = sum p ln(p/q)
  double p0 = std::exp(2.0) / (std::exp(2.0) + 1.0);
  double p1 = 1.0 - p0;
  double expected = p0 * std::log(p0 / 0.5) + p1 * std::log(p1 / 0.5);
  Graph g;
  NodeId student = g.constant(Tensor::matrix(1, 2, {0, 0}));
  DistillConfig cfg;
  cfg.alpha = 0.0;
  cfg.temperature = 1.0;
  NodeId loss = distill_loss(g, student, Tensor::matrix(1, 2, {2, 0}), {0}, cfg);
  g.forward();
  CHECK(g.value(loss).data[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("distill: class-count mismatch rejected") {
  Graph g;
  NodeId student = g.constant(Tensor::matrix(1, 3, {0, 0, 0}));
  CHECK_THROWS_WITH_AS(
      distill_loss(g, student, Tensor::matrix(1, 2, {1, 0}), {0}, {}),
      doctest::Contains("mismatch"), Error);
}

TEST_CASE("distill: gradient matches finite differences") {
  Rng rng(909);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    size_t b = 2 + rng.uniform_int(2), c = 3;
    NodeId logits = g.input("s", {b, c});
    Tensor teacher = Tensor::uniform({b, c}, rng, -2, 2);
    std::vector<int> labels(b);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(c));
    DistillConfig cfg;
    cfg.alpha = 0.4;
    cfg.temperature = 2.5;
    NodeId loss = distill_loss(g, logits, teacher, labels, cfg);
    Tensor sv = Tensor::uniform({b, c}, rng, -2, 2);
    g.set_input("s", sv);
    g.forward();
    g.backward(loss);
    Tensor analytic = g.grad(logits);
    auto f = [&](const Tensor& probe) {
      g.set_input("s", probe);
      g.forward();
      return g.value(loss).data[0];
    };
    CHECK(max_rel_err(analytic, finite_difference_gradient(f, sv, 1e-5)) <
          1e-4);
  }
}

TEST_CASE("cpc: gradient matches finite differences") {
  Rng rng(515);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    size_t t = 8, h = 3;
    NodeId z = g.input("z", {t, h});
    NodeId c = g.constant(Tensor::uniform({t, h}, rng, -1, 1));
    std::vector<NodeId> preds = {g.param("w1", Tensor::uniform({h, h}, rng, -1, 1)),
                                 g.param("w2", Tensor::uniform({h, h}, rng, -1, 1))};
    CpcLossConfig cfg;
    cfg.horizon = 2;
    cfg.n_neg = 3;
    Rng srng = rng.split(trial);
    auto terms = sample_negatives(0, t, t, cfg, srng);
    NodeId loss = cpc_loss(g, z, c, preds, terms);
    Tensor zv = Tensor::uniform({t, h}, rng, -1, 1);
    g.set_input("z", zv);
    g.forward();
    auto grads = g.backward(loss);
    auto f = [&](const Tensor& probe) {
      g.set_input("z", probe);
      g.forward();
      return g.value(loss).data[0];
    };
    CHECK(max_rel_err(g.grad(z), finite_difference_gradient(f, zv, 1e-5)) <
          1e-4);
    g.set_input("z", zv);
    auto fw = [&](const Tensor& probe) {
      g.set_param("w1", probe);
      g.forward();
      return g.value(loss).data[0];
    };
    Tensor wv = g.param_value("w1");
    CHECK(max_rel_err(grads.param_grads.at("w1"),
                      finite_difference_gradient(fw, wv, 1e-5)) < 1e-4);
  }
}
