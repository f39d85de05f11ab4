#include <algorithm>
#include <set>
#include <sstream>

#include "capsre/data.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capsre;
using namespace capsre::data;
using capsre::testing::ScratchDir;
using capsre::testing::write_file;

namespace {

WordVocab toy_vocab() {
  WordVocab v;
  v.table = EmbeddingTable({"the", "capital", "of", kUnkToken},
                           Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 1, 2.0 / 3, 2.0 / 3}));
  v.unk = 3;
  return v;
}

CorpusOptions toy_options(std::size_t max_len = 10) {
  return CorpusOptions{max_len, 2, {"NA", "capital_of", "born_in"}};
}

const char* kTwoBags =
    R"({"tokens":["Seoul","the","capital","of","Korea"],"entities":[{"id":"seoul","span":[0,1]},{"id":"korea","span":[4,5]}],"pairs":[["korea","seoul"]],"relations":["capital_of"]}
{"tokens":["Ann","of","Paris"],"entities":[{"id":"ann","span":[0,1]},{"id":"paris","span":[2,3]}],"pairs":[["ann","paris"]],"relations":["born_in"]}

{"tokens":["Korea","of","Seoul"],"entities":[{"id":"korea","span":[0,1]},{"id":"seoul","span":[2,3]}],"pairs":[["korea","seoul"]],"relations":["NA"]}
)";

}  // namespace

TEST_CASE("embedding tables load, infer width and keep the last duplicate") {
  ScratchDir dir("emb");
  write_file(dir / "e.txt", "a 1 2\nb 3 4\n\na 5 6\n");
  const EmbeddingTable t = load_embedding_table(dir / "e.txt", 0);
  CHECK(t.size() == 2);
  CHECK(t.dim() == 2);
  CHECK(t.row(*t.find("a"))[0] == 5.0);
  CHECK_FALSE(t.find("zzz").has_value());
}

TEST_CASE("malformed embedding rows name file and line") {
  ScratchDir dir("emb_bad");
  write_file(dir / "e.txt", "a 1 2\nb 3\n");
  try {
    (void)load_embedding_table(dir / "e.txt", 0);
    FAIL("expected CheckedFailure");
  } catch (const CheckedFailure& e) {
    CHECK(std::string(e.what()).find("e.txt:2") != std::string::npos);
  }
  write_file(dir / "f.txt", "a 1 x\n");
  CHECK_THROWS_AS((void)load_embedding_table(dir / "f.txt", 0), CheckedFailure);
  write_file(dir / "g.txt", "a 1 2\n");
  CHECK_THROWS_AS((void)load_embedding_table(dir / "g.txt", 3), CheckedFailure);
  CHECK_THROWS_AS((void)load_embedding_table(dir / "missing.txt", 0), CheckedFailure);
}

TEST_CASE("word vocab appends an UNK row equal to the mean") {
  ScratchDir dir("vocab");
  write_file(dir / "w.txt", "x 1 2\ny 3 6\n");
  const WordVocab v = load_word_vocab(dir / "w.txt", 2);
  CHECK(v.unk == 2);
  CHECK(v.table.row(2)[0] == 2.0);
  CHECK(v.table.row(2)[1] == 4.0);
  CHECK(v.id("y") == 1);
  CHECK(v.id("never-seen") == 2);
}

TEST_CASE("relation embeddings follow label order") {
  ScratchDir dir("rel");
  write_file(dir / "w.txt", "x 1\n");
  write_file(dir / "e.txt", "a 0 0\nb 1 1\n");
  write_file(dir / "r.txt", "born_in 2 2\nNA 0 0\ncapital_of 1 1\n");
  const EmbeddingStore s = load_embeddings(dir / "w.txt", dir / "e.txt", dir / "r.txt", 1,
                                           {"NA", "capital_of", "born_in"});
  CHECK(s.relations.row(1)[0] == 1.0);
  CHECK(s.relations.row(2)[0] == 2.0);
  CHECK_THROWS_AS((void)load_embeddings(dir / "w.txt", dir / "e.txt", dir / "r.txt", 1,
                                        {"NA", "other"}),
                  CheckedFailure);
}

TEST_CASE("position buckets clamp, shift and reserve padding and missing ids") {
  CHECK(position_bucket(3, 3, 5) == 5);
  CHECK(position_bucket(0, 3, 5) == 2);
  CHECK(position_bucket(9, 0, 5) == 10);
  CHECK(position_bucket(0, 40, 5) == 0);
  CHECK(position_bucket(2, std::nullopt, 5) == 12);
  CHECK(padding_bucket(5) == 11);
  CHECK(position_buckets(5) == 13);
}

TEST_CASE("corpus records group into bags with mirrored labels") {
  std::istringstream in(kTwoBags);
  const Corpus c = parse_corpus(in, toy_options(), toy_vocab());
  REQUIRE(c.bags.size() == 2);
  const Bag& korea = c.bags[0];
  CHECK(korea.key == "korea#seoul");
  CHECK(korea.instances.size() == 2);
  CHECK(korea.labels == std::vector<int>{0, 1});
  CHECK(korea.pair_labels[0] == std::vector<int>{0, 1});
  CHECK(korea.instances[1].gold == korea.labels);
  CHECK(korea.has_label(1));
  CHECK_FALSE(korea.has_label(2));

  const SentenceInstance& s = korea.instances[0];
  CHECK(s.word_ids == std::vector<std::int64_t>{3, 0, 1, 2, 3});
  // Slot 0 anchors on "korea" (token 4), slot 1 on "seoul" (token 0).
  CHECK(s.slots[0] == std::optional<std::size_t>(4));
  CHECK(s.slots[1] == std::optional<std::size_t>(0));
  CHECK(s.position_ids[0 * 2 + 0] == position_bucket(0, 4, 10));
  CHECK(s.position_ids[2 * 2 + 1] == position_bucket(2, 0, 10));
  CHECK(s.position_ids[7 * 2 + 0] == padding_bucket(10));
}

TEST_CASE("over-length sentences are excluded and counted") {
  std::istringstream in(kTwoBags);
  const Corpus c = parse_corpus(in, toy_options(4), toy_vocab());
  CHECK(c.excluded == 1);
  CHECK(c.bags.size() == 2);
  CHECK(c.bags[0].instances.size() == 1);
}

TEST_CASE("corpus errors carry source and line") {
  auto error_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      (void)parse_corpus(in, toy_options(), toy_vocab(), "c.jsonl");
    } catch (const CheckedFailure& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string unknown = error_of(
      R"({"tokens":["a","b"],"entities":[{"id":"x","span":[0,1]},{"id":"y","span":[1,2]}],"pairs":[["x","y"]],"relations":["spouse"]})");
  CHECK(unknown.find("c.jsonl:1") != std::string::npos);
  CHECK(unknown.find("born_in") != std::string::npos);
  CHECK(error_of("\n{not json").find("c.jsonl:2") != std::string::npos);
  CHECK(error_of(R"({"tokens":["a"],"entities":[{"id":"x","span":[0,3]}],"pairs":[],"relations":[]})")
            .find("span") != std::string::npos);
  CHECK(error_of(R"({"tokens":["a","b"],"entities":[{"id":"x","span":[0,1]}],"pairs":[["x","z"]],"relations":["NA"]})")
            .find("'z'") != std::string::npos);
}

TEST_CASE("second pair sharing an entity leaves that slot missing") {
  SentenceInstance inst;
  inst.words = {"a", "b", "c", "d"};
  inst.entities = {{"x", 0, 1}, {"y", 1, 2}, {"z", 3, 4}};
  inst.pairs = {{"x", "y"}, {"y", "z"}};
  assign_positions(inst, 6, 4);
  CHECK(inst.slots[0] == std::optional<std::size_t>(0));
  CHECK(inst.slots[1] == std::optional<std::size_t>(1));
  CHECK_FALSE(inst.slots[2].has_value());
  CHECK(inst.slots[3] == std::optional<std::size_t>(3));
  CHECK(inst.position_ids[0 * 4 + 2] == missing_bucket(6));
  CHECK_THROWS_AS(assign_positions(inst, 6, 2), CheckedFailure);
}

TEST_CASE("written corpora read back to the same bags") {
  ScratchDir dir("corpus_rt");
  std::istringstream in(kTwoBags);
  const Corpus c = parse_corpus(in, toy_options(), toy_vocab());
  write_corpus(dir / "c.jsonl", c.bags, toy_options().relations);
  const Corpus back = load_corpus(dir / "c.jsonl", toy_options(), toy_vocab());
  CHECK(back.bags == c.bags);
}

TEST_CASE("epoch batches partition a seeded permutation") {
  Rng rng(5);
  for (std::size_t count : {0u, 1u, 7u, 130u}) {
    for (std::size_t batch : {1u, 3u, 128u}) {
      Rng r = rng.fork(count * 1000 + batch);
      const auto batches = epoch_batches(count, batch, r);
      std::multiset<std::size_t> seen;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        CHECK(!batches[b].empty());
        CHECK(batches[b].size() <= batch);
        if (b + 1 < batches.size()) CHECK(batches[b].size() == batch);
        seen.insert(batches[b].begin(), batches[b].end());
      }
      CHECK(seen.size() == count);
      for (std::size_t i = 0; i < count; ++i) CHECK(seen.count(i) == 1);
    }
  }
  Rng a(1), b(1);
  CHECK(epoch_batches(50, 8, a) == epoch_batches(50, 8, b));
  Rng z(1);
  CHECK_THROWS_AS((void)epoch_batches(5, 0, z), ContractViolation);
}
