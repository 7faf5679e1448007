// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "edgespeech/autodiff/graph.hpp"
#include "edgespeech/core/rng.hpp"

namespace edgespeech::losses {

using autodiff::Graph;
using autodiff::NodeId;

// --------------------------------------------------------------------------
// contrastive predictive loss
//
// One term per (t, k): -log of the softmax weight the positive row gets
// among the candidate rows, scored against W_k c_t. Computed as
// logsumexp(scores) - score(positive), which is the max-subtracted form.

struct CandidateSet {
  std::vector<uint32_t> rows;  // rows of the embedding pool; positive first
  size_t t = 0;                // context index within c_seq
  size_t k = 1;                // prediction offset, 1-based
  bool include_positive = true;  // positive is part of the denominator set
};

struct CpcLossConfig {
  size_t horizon = 4;  // K
  size_t n_neg = 10;
  bool include_positive = true;  // positive appears in the denominator set
};

// z_pool: [N,H] rows referenced by the candidate sets; c_seq: [T,H];
// predictors: K matrices [H,H]. Returns the scalar mean over all terms.
NodeId cpc_loss(Graph& g, NodeId z_pool, NodeId c_seq,
                const std::vector<NodeId>& predictors,
                const std::vector<CandidateSet>& terms);

// Sample candidate sets for an utterance that occupies pool rows
// [pool_begin, pool_begin + length). With `pool_rows` == length the
// negatives come from the same utterance; a larger pool (the whole batch)
// realizes batch-scope sampling. Negatives are uniform over pool rows
// excluding the positive.
std::vector<CandidateSet> sample_negatives(size_t pool_begin, size_t length,
                                           size_t pool_rows,
                                           const CpcLossConfig& cfg, Rng& rng);

// --------------------------------------------------------------------------
// vq-vae loss: reconstruction + codebook + commitment

struct VqLossConfig {
  double beta = 0.25;
};

struct VqLossParts {
  NodeId total;
  NodeId reconstruction;
  NodeId codebook_term;
  NodeId commitment_term;
};

// x/recon: same shape; z_e: [T,D] rows; vq_node: the straight-through
// quantize node produced from z_e; codebook: [K,D] parameter node.
VqLossParts vqvae_loss(Graph& g, NodeId x, NodeId recon, NodeId z_e,
                       NodeId vq_node, NodeId codebook,
                       const VqLossConfig& cfg);

// --------------------------------------------------------------------------
// triplet loss

struct TripletConfig {
  double margin = 0.5;  // delta
  size_t window = 16;   // positive sampled within this many frames in time
};

// anchor/positive/negative: [1,D] embeddings. Hinge on the squared-distance
// difference. Sum terms over a batch with g.concat + g.sum.
NodeId triplet_term(Graph& g, NodeId anchor, NodeId positive, NodeId negative,
                    const TripletConfig& cfg);

// --------------------------------------------------------------------------
// distillation loss

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.5;  // weight of the hard-label cross entropy
};

// student_logits: [B,C] node; teacher_logits: [B,C] host-side constants;
// labels: one class per row. alpha*CE(student, labels) +
// (1-alpha)*T^2*KL(softmax(teacher/T) || softmax(student/T)), mean over rows.
NodeId distill_loss(Graph& g, NodeId student_logits,
                    const Tensor& teacher_logits,
                    const std::vector<int>& labels, const DistillConfig& cfg);

// Cross entropy against integer labels, mean over rows: logsumexp(row) -
// row[label].
NodeId cross_entropy(Graph& g, NodeId logits, const std::vector<int>& labels);

}  // namespace edgespeech::losses
