#include "capsre/synth.hpp"

#include <algorithm>
#include <fstream>

#include "capsre/config.hpp"
#include "json.hpp"

namespace capsre {

void SynthSpec::validate() const {
  if (pairs != 1 && pairs != 2) throw ConfigError("pairs", "must be 1 or 2");
  if (relations < 2) throw ConfigError("relations", "must be >= 2 (NA plus one relation)");
  if (pairs == 2 && relations < 3) {
    throw ConfigError("relations", "two pairs per sentence need at least two non-NA relations");
  }
  if (vocab == 0) throw ConfigError("vocab", "must be >= 1");
  if (max_instances == 0) throw ConfigError("max_instances", "must be >= 1");
  if (word_dim == 0) throw ConfigError("word_dim", "must be >= 1");
  if (entity_dim == 0) throw ConfigError("entity_dim", "must be >= 1");
  if (!(transe_noise >= 0.0)) throw ConfigError("transe_noise", "must be >= 0");
}

namespace {

std::string trigger(int relation) { return "trig_" + std::to_string(relation); }

Tensor normal_rows(std::size_t n, std::size_t d, double scale, Rng& rng) {
  Tensor t(Shape{n, d});
  for (double& x : t.data()) x = scale * rng.normal();
  return t;
}

struct Generator {
  const SynthSpec& spec;
  SynthCorpus& out;
  Rng rng;
  std::size_t next_entity = 0;

  void filler(std::vector<std::string>& words, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      words.push_back(out.words[static_cast<std::size_t>(rng.below(spec.vocab))]);
    }
  }

  /// Entity pair with e2 - e1 = emb(relation) + noise.
  data::EntityPair new_pair(int relation) {
    const std::size_t d = spec.entity_dim;
    const std::string h = "ent_" + std::to_string(next_entity++);
    const std::string t = "ent_" + std::to_string(next_entity++);
    std::vector<double> eh(d), et(d);
    for (std::size_t i = 0; i < d; ++i) {
      eh[i] = rng.normal();
      et[i] = eh[i] + out.relation_rows.at(static_cast<std::size_t>(relation), i) +
              spec.transe_noise * rng.normal();
    }
    entity_values.insert(entity_values.end(), eh.begin(), eh.end());
    entity_values.insert(entity_values.end(), et.begin(), et.end());
    out.entities.push_back(h);
    out.entities.push_back(t);
    return {h, t};
  }

  /// One sentence: filler, then per pair "e1 [trig] [filler] e2", then filler.
  data::SentenceInstance sentence(const std::vector<data::EntityPair>& pairs,
                                  const std::vector<int>& relations) {
    data::SentenceInstance inst;
    filler(inst.words, rng.below(3));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (p > 0) filler(inst.words, 1 + rng.below(3));
      inst.entities.push_back({pairs[p].first, inst.words.size(), inst.words.size() + 1});
      inst.words.push_back(pairs[p].first);
      if (relations[p] != 0) inst.words.push_back(trigger(relations[p]));
      filler(inst.words, rng.below(2));
      inst.entities.push_back({pairs[p].second, inst.words.size(), inst.words.size() + 1});
      inst.words.push_back(pairs[p].second);
    }
    const std::size_t len = inst.words.size();
    filler(inst.words, len < spec.min_tokens ? spec.min_tokens - len : rng.below(3));
    inst.pairs = pairs;
    inst.pair_relations = relations;
    return inst;
  }

  std::vector<data::Bag> bags(std::size_t count) {
    const int e = static_cast<int>(spec.relations);
    std::vector<data::Bag> result;
    for (std::size_t b = 0; b < count; ++b) {
      std::vector<int> rels;
      if (spec.pairs == 1) {
        rels.push_back(static_cast<int>(b % spec.relations));
      } else {
        // Two distinct non-NA relations.
        const int first = 1 + static_cast<int>(b % static_cast<std::size_t>(e - 1));
        int second = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(e - 2)));
        if (second >= first) ++second;
        rels = {first, second};
      }
      std::vector<data::EntityPair> pairs;
      for (int r : rels) pairs.push_back(new_pair(r));

      data::Bag bag;
      bag.key = data::bag_key(pairs);
      bag.pairs = pairs;
      for (int r : rels) bag.pair_labels.push_back({r});
      bag.labels = rels;
      std::sort(bag.labels.begin(), bag.labels.end());
      const std::size_t n = 1 + rng.below(spec.max_instances);
      for (std::size_t i = 0; i < n; ++i) {
        bag.instances.push_back(sentence(pairs, rels));
        bag.instances.back().gold = bag.labels;
      }
      result.push_back(std::move(bag));
    }
    return result;
  }

  std::vector<double> entity_values;
};

}  // namespace

SynthCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus out;
  Rng rng(spec.seed);
  out.relations.push_back("NA");
  for (std::size_t r = 1; r < spec.relations; ++r) out.relations.push_back("rel_" + std::to_string(r));

  for (std::size_t w = 0; w < spec.vocab; ++w) out.words.push_back("w" + std::to_string(w));
  for (std::size_t r = 1; r < spec.relations; ++r) out.words.push_back(trigger(static_cast<int>(r)));
  Rng word_rng = rng.fork(1);
  out.word_rows = normal_rows(out.words.size(), spec.word_dim, 1.0, word_rng);
  Rng rel_rng = rng.fork(2);
  out.relation_rows = normal_rows(spec.relations, spec.entity_dim, 1.0, rel_rng);

  Generator gen{spec, out, rng.fork(3), 0, {}};
  out.train = gen.bags(spec.bags);
  out.test = gen.bags(spec.test_bags);
  out.entity_rows = Tensor(Shape{out.entities.size(), spec.entity_dim}, std::move(gen.entity_values));
  return out;
}

void write_synthetic(const SynthCorpus& corpus, const SynthSpec& spec,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  data::write_corpus(dir / "train.jsonl", corpus.train, corpus.relations);
  data::write_corpus(dir / "test.jsonl", corpus.test, corpus.relations);
  data::write_embedding_table(dir / "words.txt", corpus.words, corpus.word_rows);
  data::write_embedding_table(dir / "entities.txt", corpus.entities, corpus.entity_rows);
  data::write_embedding_table(dir / "relations.txt", corpus.relations, corpus.relation_rows);

  RunConfig run;
  run.train.relations = corpus.relations;
  run.train.num_entities = 2 * spec.pairs;
  run.train.word_dim = spec.word_dim;
  run.train.seed = spec.seed;
  run.train_corpus = "train.jsonl";
  run.eval_corpus = "test.jsonl";
  run.word_embeddings = "words.txt";
  run.entity_embeddings = "entities.txt";
  run.relation_embeddings = "relations.txt";
  run.checkpoint = "model.ckpt";
  run.log = "train_log.jsonl";
  std::ofstream out(dir / "config.json", std::ios::trunc);
  if (!out) throw CheckedFailure("cannot write " + (dir / "config.json").string());
  out << to_json(run).dump(2) << '\n';
}

}  // namespace capsre
