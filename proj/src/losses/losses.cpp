// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/losses/losses.hpp"

#include <cmath>

#include "edgespeech/core/error.hpp"

namespace edgespeech::losses {

NodeId cpc_loss(Graph& g, NodeId z_pool, NodeId c_seq,
                const std::vector<NodeId>& predictors,
                const std::vector<CandidateSet>& terms) {
  require(!predictors.empty(), "cpc_loss: no predictors");
  require(!terms.empty(), "cpc_loss: no (t,k) terms");

  // P_k[t] = W_k c_t for all t at once
  std::vector<NodeId> projected;
  projected.reserve(predictors.size());
  for (NodeId w : predictors)
    projected.push_back(g.matmul(c_seq, g.transpose(w)));

  std::vector<NodeId> term_nodes;
  term_nodes.reserve(terms.size());
  for (const auto& term : terms) {
    require(term.k >= 1 && term.k <= predictors.size(),
            "cpc_loss: prediction offset out of horizon");
    require(term.rows.size() >= 2, "cpc_loss: empty negative set");
    NodeId p = g.slice_rows(projected[term.k - 1], term.t, term.t + 1);
    NodeId cands = g.rows(z_pool, term.rows);
    NodeId scores =
        g.reshape(g.matmul(cands, g.transpose(p)), {term.rows.size()});
    NodeId denom = term.include_positive
                       ? scores
                       : g.slice_rows(scores, 1, term.rows.size());
    NodeId lse = g.logsumexp(denom);
    NodeId pos = g.reshape(g.slice_rows(scores, 0, 1), {});
    term_nodes.push_back(g.reshape(g.sub(lse, pos), {1}));
  }
  return g.mean(g.concat(term_nodes));
}

std::vector<CandidateSet> sample_negatives(size_t pool_begin, size_t length,
                                           size_t pool_rows,
                                           const CpcLossConfig& cfg,
                                           Rng& rng) {
  require(cfg.n_neg >= 1, "cpc negatives: n_neg must be >= 1");
  require(pool_rows >= 2, "cpc negatives: pool too small");
  std::vector<CandidateSet> terms;
  if (length <= cfg.horizon) return terms;  // no valid t
  for (size_t t = 0; t + cfg.horizon < length; ++t) {
    for (size_t k = 1; k <= cfg.horizon; ++k) {
      CandidateSet cs;
      cs.t = t;
      cs.k = k;
      const uint32_t positive = static_cast<uint32_t>(pool_begin + t + k);
      cs.include_positive = cfg.include_positive;
      cs.rows.push_back(positive);
      while (cs.rows.size() < cfg.n_neg + 1) {
        uint32_t cand = static_cast<uint32_t>(rng.uniform_int(pool_rows));
        if (cand == positive) continue;  // draw from other time steps
        cs.rows.push_back(cand);
      }
      terms.push_back(std::move(cs));
    }
  }
  return terms;
}

VqLossParts vqvae_loss(Graph& g, NodeId x, NodeId recon, NodeId z_e,
                       NodeId vq_node, NodeId codebook,
                       const VqLossConfig& cfg) {
  require(cfg.beta >= 0.0, "vqvae_loss: beta must be >= 0");
  VqLossParts parts;
  NodeId diff = g.sub(x, recon);
  parts.reconstruction = g.mean(g.mul(diff, diff));
  NodeId c_q = g.codebook_lookup(codebook, vq_node);
  parts.codebook_term = g.mean(g.l2sq_rows(g.stop_grad(z_e), c_q));
  parts.commitment_term =
      g.scale(g.mean(g.l2sq_rows(z_e, g.stop_grad(c_q))), cfg.beta);
  parts.total = g.add(g.add(parts.reconstruction, parts.codebook_term),
                      parts.commitment_term);
  return parts;
}

NodeId triplet_term(Graph& g, NodeId anchor, NodeId positive, NodeId negative,
                    const TripletConfig& cfg) {
  require(cfg.margin >= 0.0, "triplet: margin must be >= 0");
  NodeId d_pos = g.l2sq_rows(anchor, positive);  // [1]
  NodeId d_neg = g.l2sq_rows(anchor, negative);
  NodeId hinge = g.relu(
      g.add(g.sub(d_pos, d_neg), g.constant(Tensor::from({cfg.margin}))));
  return g.reshape(hinge, {});
}

NodeId cross_entropy(Graph& g, NodeId logits, const std::vector<int>& labels) {
  const auto& shape = g.shape(logits);
  require(shape.size() == 2, "cross_entropy: logits must be [B,C]");
  require(labels.size() == shape[0], "cross_entropy: label count mismatch");
  std::vector<NodeId> rows;
  rows.reserve(labels.size());
  for (size_t b = 0; b < labels.size(); ++b) {
    require(labels[b] >= 0 && static_cast<size_t>(labels[b]) < shape[1],
            "cross_entropy: label out of range");
    NodeId row = g.reshape(g.slice_rows(logits, b, b + 1), {shape[1]});
    NodeId lse = g.logsumexp(row);
    NodeId truth = g.reshape(
        g.slice_rows(row, static_cast<size_t>(labels[b]),
                     static_cast<size_t>(labels[b]) + 1),
        {});
    rows.push_back(g.reshape(g.sub(lse, truth), {1}));
  }
  return g.mean(g.concat(rows));
}

NodeId distill_loss(Graph& g, NodeId student_logits,
                    const Tensor& teacher_logits,
                    const std::vector<int>& labels, const DistillConfig& cfg) {
  require(cfg.temperature > 0.0, "distill: temperature must be positive");
  require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "distill: alpha in [0,1]");
  const auto& shape = g.shape(student_logits);
  require(shape.size() == 2, "distill: logits must be [B,C]");
  require(teacher_logits.shape == shape,
          "distill: teacher/student class count mismatch (teacher " +
              teacher_logits.shape_str() + ")");
  const size_t batch = shape[0], classes = shape[1];
  const double t = cfg.temperature;

  // softened teacher distribution and its entropy term, computed host-side
  std::vector<NodeId> kl_rows;
  kl_rows.reserve(batch);
  for (size_t b = 0; b < batch; ++b) {
    std::vector<double> p(classes);
    double mx = teacher_logits.at(b, 0) / t;
    for (size_t c = 0; c < classes; ++c)
      mx = std::max(mx, teacher_logits.at(b, c) / t);
    double z = 0.0;
    for (size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(teacher_logits.at(b, c) / t - mx);
      z += p[c];
    }
    double p_log_p = 0.0;
    for (size_t c = 0; c < classes; ++c) {
      p[c] /= z;
      if (p[c] > 0.0) p_log_p += p[c] * std::log(p[c]);
    }

    // KL(p || q) = sum p log p - sum p log q;  log q = s/T - lse(s/T)
    NodeId row = g.reshape(g.slice_rows(student_logits, b, b + 1), {classes});
    NodeId soft = g.scale(row, 1.0 / t);
    NodeId lse = g.logsumexp(soft);
    Tensor pt({classes}, std::move(p));
    NodeId dot = g.sum(g.mul(soft, g.constant(pt)));
    NodeId kl = g.add(g.sub(g.constant(Tensor::scalar(p_log_p)), dot), lse);
    kl_rows.push_back(g.reshape(kl, {1}));
  }
  NodeId kl_mean = g.mean(g.concat(kl_rows));
  NodeId soft_term = g.scale(kl_mean, (1.0 - cfg.alpha) * t * t);
  NodeId hard_term =
      g.scale(cross_entropy(g, student_logits, labels), cfg.alpha);
  return g.add(hard_term, soft_term);
}

}  // namespace edgespeech::losses
