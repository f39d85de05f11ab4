#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capsre/data.hpp"

namespace capsre {

/// Parameters of the synthetic corpus generator. Relation 0 is NA; every
/// other relation r is signalled by a trigger token "trig_r" placed between
/// the two entities of its pair.
struct SynthSpec {
  std::size_t relations = 4;  // E, including NA
  std::size_t vocab = 200;    // filler words
  std::size_t bags = 50;
  std::size_t test_bags = 20;
  std::size_t pairs = 1;  // entity pairs per sentence, 1 or 2
  std::size_t max_instances = 3;
  std::size_t min_tokens = 6;
  std::size_t word_dim = 50;
  std::size_t entity_dim = 16;
  double transe_noise = 0.0;  // sigma of e2 - e1 - r
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthCorpus {
  std::vector<std::string> relations;
  std::vector<data::Bag> train;
  std::vector<data::Bag> test;
  std::vector<std::string> words;
  Tensor word_rows;
  std::vector<std::string> entities;
  Tensor entity_rows;
  Tensor relation_rows;
};

SynthCorpus generate_synthetic(const SynthSpec& spec);

/// Writes train.jsonl, test.jsonl, words.txt, entities.txt, relations.txt and
/// a config.json that points at them.
void write_synthetic(const SynthCorpus& corpus, const SynthSpec& spec,
                     const std::filesystem::path& dir);

}  // namespace capsre
