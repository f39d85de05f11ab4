#include "capsre/model.hpp"

#include <algorithm>
#include <cmath>

#include "capsre/ops.hpp"

namespace capsre {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

ParameterSet build_parameters(const TrainConfig& config, Rng& rng) {
  config.validate();
  const std::size_t l = config.max_len;
  const std::size_t v = config.input_width();
  const std::size_t b = config.hidden;
  const std::size_t e = config.num_relations();
  const std::size_t d = config.capsule_dim;
  const std::size_t cd = config.capsule_channels * d;

  ParameterSet p;
  const std::size_t buckets = data::position_buckets(l);
  for (std::size_t m = 0; m < config.num_entities; ++m) {
    p.add("pos_emb." + std::to_string(m),
          glorot_uniform(Shape{buckets, config.pos_dim}, buckets, config.pos_dim, rng));
  }
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string prefix = std::string("lstm.") + dir + ".";
    p.add(prefix + "input", glorot_uniform(Shape{v, 4 * b}, v, 4 * b, rng));
    p.add(prefix + "recurrent", glorot_uniform(Shape{b, 4 * b}, b, 4 * b, rng));
    p.add(prefix + "bias", Tensor(Shape{4 * b}));
  }
  if (config.word_attention) {
    p.add("attn.A", glorot_uniform(Shape{2 * b, 2 * b}, 2 * b, 2 * b, rng));
    p.add("attn.r", glorot_uniform(Shape{2 * b}, 2 * b, 1, rng));
  }
  if (config.capsule) {
    p.add("caps.filters", glorot_uniform(Shape{cd, 4 * b}, 4 * b, cd, rng));
    p.add("caps.bias", Tensor(Shape{cd}));
    p.add("caps.transforms", glorot_uniform(Shape{e, d, d}, d, d, rng));
    p.add("caps.vote_bias", Tensor(Shape{e, d}));
  } else {
    p.add("head.weight", glorot_uniform(Shape{2 * b, e}, 2 * b, e, rng));
    p.add("head.bias", Tensor(Shape{e}));
  }
  return p;
}

Model::Model(TrainConfig config, std::shared_ptr<const Tensor> word_table,
             std::int64_t unk, Rng& init_rng)
    : config_(std::move(config)), word_table_(std::move(word_table)), unk_(unk) {
  if (!word_table_ || word_table_->rank() != 2 ||
      word_table_->cols() != config_.word_dim) {
    throw ContractViolation(
        "word table " + (word_table_ ? word_table_->shape().str() : "<none>") +
        " does not match word_dim " + std::to_string(config_.word_dim));
  }
  params_ = build_parameters(config_, init_rng);
  if (config_.tune_word_embeddings) {
    params_.add("word_embedding", *word_table_);
    word_table_.reset();
  }
}

Model::Model(TrainConfig config, std::shared_ptr<const Tensor> word_table,
             std::int64_t unk, ParameterSet params)
    : config_(std::move(config)),
      word_table_(std::move(word_table)),
      unk_(unk),
      params_(std::move(params)) {
  if (config_.tune_word_embeddings) {
    if (!params_.contains("word_embedding")) {
      throw ContractViolation("tuned model is missing parameter 'word_embedding'");
    }
    word_table_.reset();
  } else if (!word_table_ || word_table_->cols() != config_.word_dim) {
    throw ContractViolation("frozen word table does not match word_dim " +
                            std::to_string(config_.word_dim));
  }
}

Var Model::word_table(const Binder& bind) const {
  if (config_.tune_word_embeddings) return bind(params_.get("word_embedding"));
  return Var(word_table_);
}

Var Model::forward(const data::SentenceInstance& inst, const Binder& bind,
                   bool training, Rng* rng, ForwardTrace* trace) const {
  const TrainConfig& c = config_;
  std::vector<Var> pos;
  pos.reserve(c.num_entities);
  for (std::size_t m = 0; m < c.num_entities; ++m) {
    pos.push_back(bind(params_.get("pos_emb." + std::to_string(m))));
  }
  encoder::Embedded emb = encoder::embed(inst, word_table(bind), pos, c.max_len, unk_);

  auto lstm = [&](const char* dir) {
    const std::string prefix = std::string("lstm.") + dir + ".";
    return encoder::LstmWeights{bind(params_.get(prefix + "input")),
                                bind(params_.get(prefix + "recurrent")),
                                bind(params_.get(prefix + "bias"))};
  };
  Var hidden = encoder::bilstm(emb.rows, emb.mask, lstm("fwd"), lstm("bwd"));
  if (training && c.dropout > 0.0) {
    if (rng == nullptr) throw ContractViolation("training forward needs an rng");
    hidden = ops::dropout(hidden, 1.0 - c.dropout, true, *rng);
  }

  Var attention;
  Var sequence;
  if (c.word_attention) {
    encoder::Attended att = encoder::word_attention(
        hidden, bind(params_.get("attn.A")), bind(params_.get("attn.r")), emb.mask);
    attention = att.weights;
    sequence = att.rows;
  } else {
    Tensor keep(Shape{c.max_len});
    for (std::size_t t = 0; t < c.max_len; ++t) keep[t] = emb.mask[t] ? 1.0 : 0.0;
    sequence = ops::scale_rows(hidden, Var(std::move(keep)));
  }

  Var activations;
  capsule::CapsuleSet children;
  capsule::RoutingState routing;
  if (c.capsule) {
    // Padding rows spawn no capsules: only the n+1 windows touching a token.
    const std::size_t n = std::min<std::size_t>(inst.word_ids.size(), c.max_len);
    const Var real = n < c.max_len ? ops::slice(sequence, 0, 0, n) : sequence;
    children = capsule::primary_capsules(real, bind(params_.get("caps.filters")),
                                         bind(params_.get("caps.bias")),
                                         c.capsule_channels, c.capsule_dim);
    const Var votes = capsule::votes(children, bind(params_.get("caps.transforms")),
                                     bind(params_.get("caps.vote_bias")));
    routing = capsule::dynamic_routing(votes, children.activation, c.routing_iters);
    activations = routing.activation;
  } else {
    // Attention-weighted sum, or the mean of real positions without attention.
    std::size_t n = 0;
    for (char m : emb.mask) n += m ? 1 : 0;
    Tensor pool(Shape{1, c.max_len});
    for (std::size_t t = 0; t < c.max_len; ++t) {
      if (emb.mask[t]) pool[t] = c.word_attention ? 1.0 : 1.0 / static_cast<double>(n);
    }
    const Var pooled = ops::matmul(Var(std::move(pool)), sequence);
    const Var logits = ops::add_row(ops::matmul(pooled, bind(params_.get("head.weight"))),
                                    bind(params_.get("head.bias")));
    activations = ops::reshape(ops::sigmoid(logits), Shape{c.num_relations()});
  }

  if (trace != nullptr) {
    trace->embedded = std::move(emb);
    trace->hidden = hidden;
    trace->attention = attention;
    trace->sequence = sequence;
    trace->children = children;
    trace->routing = routing;
    trace->activations = activations;
  }
  return activations;
}

Tensor Model::scores(const data::SentenceInstance& inst) const {
  return forward(inst, Binder(), false, nullptr).value();
}

}  // namespace capsre
