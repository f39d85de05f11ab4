#pragma once

#include <memory>
#include <vector>

#include "capsre/autodiff.hpp"
#include "capsre/capsule.hpp"
#include "capsre/config.hpp"
#include "capsre/data.hpp"
#include "capsre/encoder.hpp"
#include "capsre/rng.hpp"

namespace capsre {

/// Creates every learned tensor implied by `config`:
///   pos_emb.<m>               (2L+3) x d_p, one per entity slot
///   lstm.{fwd,bwd}.{input,recurrent,bias}
///   attn.A, attn.r            2B x 2B, 2B    (word attention only)
///   caps.filters, caps.bias   (C*d) x 4B, C*d (capsule head)
///   caps.transforms, caps.vote_bias  E x d x d, E x d
///   head.weight, head.bias    2B x E, E     (dense head when capsule=false)
/// Weight matrices use Glorot-uniform initialization, biases start at zero.
ParameterSet build_parameters(const TrainConfig& config, Rng& rng);

/// Intermediate values of one forward pass, kept for inspection and tests.
struct ForwardTrace {
  encoder::Embedded embedded;
  Var hidden;            // L x 2B Bi-LSTM output (after dropout in training)
  Var attention;         // L x 1 weights; empty without word attention
  Var sequence;          // L x 2B input to the head
  capsule::CapsuleSet children;
  capsule::RoutingState routing;
  Var activations;       // E scores in [0, 1)
};

/// Parameters plus the word table, evaluated per sentence.
class Model {
 public:
  /// The word table stays frozen unless config.tune_word_embeddings is set,
  /// in which case it becomes the parameter "word_embedding".
  Model(TrainConfig config, std::shared_ptr<const Tensor> word_table,
        std::int64_t unk, Rng& init_rng);
  /// Adopts already-built parameters (checkpoint restore).
  Model(TrainConfig config, std::shared_ptr<const Tensor> word_table,
        std::int64_t unk, ParameterSet params);

  const TrainConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  std::int64_t unk() const { return unk_; }
  const std::shared_ptr<const Tensor>& frozen_words() const { return word_table_; }

  /// Relation scores (rank-1, E entries) for one sentence. In training mode
  /// dropout draws from `rng`.
  Var forward(const data::SentenceInstance& inst, const Binder& bind,
              bool training, Rng* rng, ForwardTrace* trace = nullptr) const;

  /// Evaluation-mode scores as a plain tensor.
  Tensor scores(const data::SentenceInstance& inst) const;

 private:
  Var word_table(const Binder& bind) const;

  TrainConfig config_;
  std::shared_ptr<const Tensor> word_table_;
  std::int64_t unk_;
  ParameterSet params_;
};

/// Glorot-uniform matrix of the given shape with explicit fans.
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace capsre
