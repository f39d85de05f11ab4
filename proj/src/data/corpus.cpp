#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "capsre/data.hpp"

namespace capsre::data {

using nlohmann::json;

std::int32_t position_bucket(std::size_t token, std::optional<std::size_t> anchor,
                             std::size_t max_len) {
  if (!anchor) return missing_bucket(max_len);
  const auto l = static_cast<std::int64_t>(max_len);
  std::int64_t d = static_cast<std::int64_t>(token) - static_cast<std::int64_t>(*anchor);
  d = std::clamp(d, -l, l);
  return static_cast<std::int32_t>(d + l);
}

bool Bag::has_label(int relation) const {
  return std::binary_search(labels.begin(), labels.end(), relation);
}

std::string bag_key(const std::vector<EntityPair>& pairs) {
  std::string key;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) key += ';';
    key += pairs[i].first + '#' + pairs[i].second;
  }
  return key;
}

void assign_positions(SentenceInstance& inst, std::size_t max_len,
                      std::size_t num_entities) {
  if (num_entities != 2 && num_entities != 4) {
    throw ContractViolation("num_entities must be 2 or 4, got " +
                            std::to_string(num_entities));
  }
  if (inst.pairs.empty() || inst.pairs.size() > 2) {
    throw CheckedFailure("a sentence needs one or two entity pairs, got " +
                         std::to_string(inst.pairs.size()));
  }
  if (inst.pairs.size() * 2 > num_entities) {
    throw CheckedFailure("sentence has " + std::to_string(inst.pairs.size()) +
                         " entity pairs but only " + std::to_string(num_entities) +
                         " entity slots are configured");
  }
  auto anchor = [&](const std::string& id) -> std::size_t {
    for (const auto& m : inst.entities) {
      if (m.id == id) return m.begin;
    }
    throw CheckedFailure("entity '" + id + "' used in a pair has no span");
  };

  inst.slots.assign(num_entities, std::nullopt);
  std::vector<std::string> placed;
  for (std::size_t p = 0; p < inst.pairs.size(); ++p) {
    const std::string* ids[2] = {&inst.pairs[p].first, &inst.pairs[p].second};
    for (std::size_t k = 0; k < 2; ++k) {
      const std::string& id = *ids[k];
      // An entity shared with the first pair keeps its first slot; its
      // duplicate slot stays missing.
      if (p > 0 && std::find(placed.begin(), placed.end(), id) != placed.end()) {
        continue;
      }
      inst.slots[2 * p + k] = anchor(id);
      placed.push_back(id);
    }
  }

  const std::size_t n = inst.words.size();
  inst.position_ids.assign(max_len * num_entities, padding_bucket(max_len));
  for (std::size_t t = 0; t < std::min(n, max_len); ++t) {
    for (std::size_t m = 0; m < num_entities; ++m) {
      inst.position_ids[t * num_entities + m] = position_bucket(t, inst.slots[m], max_len);
    }
  }
}

namespace {

std::string known_list(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) s += ", ";
    s += names[i];
  }
  return s;
}

SentenceInstance parse_record(const json& rec, const CorpusOptions& options,
                              const std::unordered_map<std::string, int>& rel_ids,
                              const WordVocab& vocab) {
  SentenceInstance inst;
  inst.words = rec.at("tokens").get<std::vector<std::string>>();
  for (const auto& e : rec.at("entities")) {
    EntityMention m;
    m.id = e.at("id").get<std::string>();
    const auto span = e.at("span").get<std::vector<std::size_t>>();
    if (span.size() != 2 || span[0] >= span[1] || span[1] > inst.words.size()) {
      throw CheckedFailure("entity '" + m.id + "' has an invalid span");
    }
    m.begin = span[0];
    m.end = span[1];
    inst.entities.push_back(std::move(m));
  }
  for (const auto& p : rec.at("pairs")) {
    const auto ids = p.get<std::vector<std::string>>();
    if (ids.size() != 2) throw CheckedFailure("each pair needs exactly two entity ids");
    inst.pairs.emplace_back(ids[0], ids[1]);
  }
  const auto rels = rec.at("relations").get<std::vector<std::string>>();
  if (rels.size() != inst.pairs.size()) {
    throw CheckedFailure("relations (" + std::to_string(rels.size()) +
                         ") must align with pairs (" +
                         std::to_string(inst.pairs.size()) + ")");
  }
  for (const auto& r : rels) {
    auto it = rel_ids.find(r);
    if (it == rel_ids.end()) {
      throw CheckedFailure("unknown relation '" + r + "'; known relations: " +
                           known_list(options.relations));
    }
    inst.pair_relations.push_back(it->second);
  }
  inst.word_ids.reserve(inst.words.size());
  for (const auto& w : inst.words) inst.word_ids.push_back(vocab.id(w));
  assign_positions(inst, options.max_len, options.num_entities);
  return inst;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const CorpusOptions& options,
                    const WordVocab& vocab, const std::string& source) {
  std::unordered_map<std::string, int> rel_ids;
  for (std::size_t i = 0; i < options.relations.size(); ++i) {
    rel_ids.emplace(options.relations[i], static_cast<int>(i));
  }

  Corpus corpus;
  std::unordered_map<std::string, std::size_t> by_key;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SentenceInstance inst;
    try {
      const json rec = json::parse(line);
      if (rec.at("tokens").size() > options.max_len) {
        ++corpus.excluded;
        continue;
      }
      inst = parse_record(rec, options, rel_ids, vocab);
    } catch (const json::exception& e) {
      throw CheckedFailure(source + ":" + std::to_string(lineno) +
                           ": malformed record: " + e.what());
    } catch (const CheckedFailure& e) {
      throw CheckedFailure(source + ":" + std::to_string(lineno) + ": " + e.what());
    }

    const std::string key = bag_key(inst.pairs);
    auto [it, fresh] = by_key.emplace(key, corpus.bags.size());
    if (fresh) {
      Bag bag;
      bag.key = key;
      bag.pairs = inst.pairs;
      bag.pair_labels.resize(inst.pairs.size());
      corpus.bags.push_back(std::move(bag));
    }
    Bag& bag = corpus.bags[it->second];
    for (std::size_t p = 0; p < inst.pairs.size(); ++p) {
      bag.pair_labels[p].push_back(inst.pair_relations[p]);
      bag.labels.push_back(inst.pair_relations[p]);
    }
    bag.instances.push_back(std::move(inst));
  }

  auto sort_unique = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  for (Bag& bag : corpus.bags) {
    sort_unique(bag.labels);
    for (auto& pl : bag.pair_labels) sort_unique(pl);
    for (auto& inst : bag.instances) inst.gold = bag.labels;
  }
  if (corpus.excluded > 0) {
    spdlog::warn("{}: excluded {} sentence(s) longer than {} tokens", source,
                 corpus.excluded, options.max_len);
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options,
                   const WordVocab& vocab) {
  std::ifstream in(path);
  if (!in) throw CheckedFailure("cannot open corpus " + path.string());
  return parse_corpus(in, options, vocab, path.string());
}

void write_corpus(const std::filesystem::path& path, const std::vector<Bag>& bags,
                  const std::vector<std::string>& relation_names) {
  std::ofstream out(path);
  if (!out) throw CheckedFailure("cannot write " + path.string());
  for (const Bag& bag : bags) {
    for (const SentenceInstance& inst : bag.instances) {
      json rec;
      rec["tokens"] = inst.words;
      json ents = json::array();
      for (const auto& m : inst.entities) {
        ents.push_back({{"id", m.id}, {"span", {m.begin, m.end}}});
      }
      rec["entities"] = std::move(ents);
      json pairs = json::array();
      for (const auto& p : inst.pairs) pairs.push_back({p.first, p.second});
      rec["pairs"] = std::move(pairs);
      json rels = json::array();
      for (int r : inst.pair_relations) rels.push_back(relation_names.at(r));
      rec["relations"] = std::move(rels);
      out << rec.dump() << '\n';
    }
  }
}

}  // namespace capsre::data
