// Small hand-checkable cases, one block per module.

#include <cmath>
#include <sstream>

#include "capsre/adam.hpp"
#include "capsre/capsule.hpp"
#include "capsre/cli.hpp"
#include "capsre/encoder.hpp"
#include "capsre/grad_check.hpp"
#include "capsre/metrics.hpp"
#include "capsre/ops.hpp"
#include "capsre/prediction.hpp"
#include "capsre/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capsre;
using capsre::testing::random_tensor;
using capsre::testing::ScratchDir;

// core ----------------------------------------------------------------------

TEST_CASE("op values: uniform softmax, identity matmul, 3-4-5 norm") {
  const Tensor s = ops::softmax(Var(Tensor::matrix(1, 3, {0, 0, 0})), 1).value();
  for (double p : s.storage()) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
  Rng rng(1);
  const Tensor x = random_tensor(Shape{3, 4}, rng);
  const Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(ops::matmul(Var(eye), Var(x)).value() == x);
  CHECK(ops::l2_norm(Var(Tensor::vector({3, 4}))).value().item() == 5.0);
}

TEST_CASE("backward: linear, quadratic and disconnected inputs") {
  Tape tape;
  const Var x = tape.leaf(Tensor::vector({0.3, -1.0, 2.0}));
  const Var y = tape.leaf(Tensor::vector({1.0, 2.0}));
  const Var p = tape.leaf(Tensor::vector({7.0}));
  const Var loss = ops::add(ops::sum(x), ops::sum(ops::square(y)));
  const Gradients g = tape.backward(loss);
  CHECK(g.wrt(x) == Tensor::vector({1, 1, 1}));
  CHECK(g.wrt(y) == Tensor::vector({2, 4}));
  CHECK(g.wrt(p) == Tensor::vector({0}));
}

TEST_CASE("grad_check agrees on sums and catches a wrong backward rule") {
  Rng rng(2);
  const Tensor x = random_tensor(Shape{2, 3}, rng);
  CHECK(grad_check([](const Var& v) { return ops::sum(v); }, x) < 1e-9);
  CHECK(grad_check([](const Var& v) { return ops::l2_norm(ops::squash_rows(v)); }, x) < 1e-4);
  auto wrong = [](const Var& v) {
    double s = 0.0;
    for (double e : v.value().storage()) s += e;
    const std::array<Var, 1> in{v};
    return Tape::record(Tensor::scalar(s), in, [](const Tensor& g, std::span<Tensor* const> gi) {
      if (gi[0]) {
        for (double& d : gi[0]->data()) d += 2.0 * g.item();
      }
    });
  };
  CHECK(grad_check(wrong, x) > 1e-2);
}

TEST_CASE("Adam: zero gradient is a fixed point, constant gradient moves by lr") {
  ParameterSet params;
  params.add("w", Tensor::vector({0.5, -0.5}));
  Adam adam(params, AdamConfig{0.001});
  Gradients zero(params);
  zero.raw(0) = Tensor::vector({0.0, 0.0});
  adam.step(params, zero);
  CHECK(*params[0].value == Tensor::vector({0.5, -0.5}));

  Adam fresh(params, AdamConfig{0.001});
  Gradients g(params);
  g.raw(0) = Tensor::vector({0.3, -4.0});
  for (int t = 0; t < 200; ++t) {
    const Tensor before = *params[0].value;
    fresh.step(params, g);
    CHECK(before[0] - (*params[0].value)[0] == doctest::Approx(0.001).epsilon(1e-6));
    CHECK((*params[0].value)[1] - before[1] == doctest::Approx(0.001).epsilon(1e-6));
  }
}

// data ----------------------------------------------------------------------

TEST_CASE("corpus edge cases: over-length record and empty file") {
  data::WordVocab vocab;
  vocab.table = data::EmbeddingTable({"w", "<unk>"}, Tensor::matrix(2, 1, {1, 1}));
  vocab.unk = 1;
  const data::CorpusOptions opts{120, 2, {"NA", "r"}};
  nlohmann::json rec;
  rec["tokens"] = std::vector<std::string>(121, "w");
  rec["entities"] = {{{"id", "a"}, {"span", {0, 1}}}, {{"id", "b"}, {"span", {5, 6}}}};
  rec["pairs"] = {{"a", "b"}};
  rec["relations"] = {"r"};
  std::istringstream long_in(rec.dump() + "\n");
  const auto c = data::parse_corpus(long_in, opts, vocab);
  CHECK(c.excluded == 1);
  CHECK(c.bags.empty());
  std::istringstream empty_in("");
  const auto e = data::parse_corpus(empty_in, opts, vocab);
  CHECK(e.bags.empty());
  CHECK(e.excluded == 0);
}

TEST_CASE("position buckets at the anchor, far left and for a missing slot") {
  CHECK(data::position_bucket(7, 7, 120) == 120);
  CHECK(data::position_bucket(0, 119, 120) == 1);
  data::SentenceInstance inst;
  inst.words = {"a", "x", "b"};
  inst.entities = {{"a", 0, 1}, {"b", 2, 3}};
  inst.pairs = {{"a", "b"}};
  data::assign_positions(inst, 120, 4);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(inst.position_ids[t * 4 + 2] == 2 * 120 + 2);
    CHECK(inst.position_ids[t * 4 + 3] == 2 * 120 + 2);
  }
}

TEST_CASE("five bags in batches of two, and seeds change the order") {
  Rng r(9);
  const auto b = data::epoch_batches(5, 2, r);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 2);
  CHECK(b[1].size() == 2);
  CHECK(b[2].size() == 1);
  Rng s1(1), s2(2);
  CHECK_FALSE(data::epoch_batches(10, 10, s1) == data::epoch_batches(10, 10, s2));
}

TEST_CASE("three 4-d rows load with an UNK row") {
  ScratchDir dir("ex_vocab");
  capsre::testing::write_file(dir / "w.txt", "a 1 2 3 4\nb 0 0 0 0\nc 2 1 0 -1\n");
  const auto v = data::load_word_vocab(dir / "w.txt", 4);
  CHECK(v.table.size() == 4);
  CHECK(v.table.row(3)[0] == 1.0);
  CHECK(v.table.row(3)[3] == 1.0);
  capsre::testing::write_file(dir / "bad.txt", "a 1 2 3 4\nb 1 2 3\n");
  CHECK_THROWS_AS((void)data::load_word_vocab(dir / "bad.txt", 4), CheckedFailure);
}

// encoder -------------------------------------------------------------------

namespace {

encoder::LstmWeights lstm_weights(Rng& rng, std::size_t v, std::size_t b) {
  return {Var(random_tensor(Shape{v, 4 * b}, rng)), Var(random_tensor(Shape{b, 4 * b}, rng)),
          Var(random_tensor(Shape{4 * b}, rng))};
}

}  // namespace

TEST_CASE("embedding rows: width, all padding, missing slots") {
  TrainConfig c;
  c.word_dim = 4;
  c.pos_dim = 5;
  CHECK(c.input_width() == 14);

  Rng rng(3);
  const std::size_t len = 5;
  const std::size_t buckets = data::position_buckets(len);
  const Tensor words = random_tensor(Shape{3, 2}, rng);
  std::vector<Var> pos;
  std::vector<Tensor> tables;
  for (int m = 0; m < 4; ++m) {
    tables.push_back(random_tensor(Shape{buckets, 2}, rng));
    pos.emplace_back(tables.back());
  }

  data::SentenceInstance blank;
  blank.position_ids.assign(len * 2, 0);
  const std::vector<Var> two(pos.begin(), pos.begin() + 2);
  const auto e0 = encoder::embed(blank, Var(words), two, len, 2);
  CHECK(e0.mask == std::vector<char>(len, 0));
  CHECK(e0.rows.value() == Tensor(Shape{len, 6}));

  data::SentenceInstance inst;
  inst.words = {"a", "b", "c"};
  inst.word_ids = {0, 1, 0};
  inst.entities = {{"h", 0, 1}, {"t", 2, 3}};
  inst.pairs = {{"h", "t"}};
  data::assign_positions(inst, len, 4);
  const auto e = encoder::embed(inst, Var(words), pos, len, 2);
  const auto missing = static_cast<std::size_t>(data::missing_bucket(len));
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(e.rows.value().at(t, 2 + 2 * 2 + k) == tables[2].at(missing, k));
      CHECK(e.rows.value().at(t, 2 + 3 * 2 + k) == tables[3].at(missing, k));
    }
  }
}

TEST_CASE("Bi-LSTM: one step, zero weights, and reversal symmetry") {
  Rng rng(4);
  const auto w = lstm_weights(rng, 3, 2);
  const Tensor x1 = random_tensor(Shape{1, 3}, rng);
  const Tensor h1 = encoder::bilstm(Var(x1), std::vector<char>{1}, w, w).value();
  CHECK(h1.shape() == Shape{1, 4});
  CHECK(h1.at(0, 0) == h1.at(0, 2));
  CHECK(h1.at(0, 1) == h1.at(0, 3));

  const encoder::LstmWeights zero{Var(Tensor(Shape{3, 8})), Var(Tensor(Shape{2, 8})),
                                  Var(Tensor(Shape{8}))};
  const Tensor x = random_tensor(Shape{4, 3}, rng);
  CHECK(encoder::bilstm(Var(x), std::vector<char>(4, 1), zero, zero).value() == Tensor(Shape{4, 4}));

  Tensor rev(Shape{4, 3});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t k = 0; k < 3; ++k) rev.at(t, k) = x.at(3 - t, k);
  const std::vector<char> all(4, 1);
  const Tensor fwd = encoder::lstm_direction(Var(x), all, w, false).value();
  const Tensor back = encoder::lstm_direction(Var(rev), all, w, true).value();
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t k = 0; k < 2; ++k) CHECK(fwd.at(t, k) == back.at(3 - t, k));
}

TEST_CASE("word attention: identical rows, one real row, A=I with r=e1") {
  Rng rng(5);
  const Tensor a = random_tensor(Shape{2, 2}, rng);
  const Tensor r = random_tensor(Shape{2}, rng);
  const Tensor same = Tensor::matrix(3, 2, {0.4, -0.2, 0.4, -0.2, 0.4, -0.2});
  const auto u = encoder::word_attention(Var(same), Var(a), Var(r), std::vector<char>{1, 1, 0});
  CHECK(u.weights.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(u.weights.value()[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(u.weights.value()[2] == 0.0);

  const Tensor h = random_tensor(Shape{3, 2}, rng);
  const auto one = encoder::word_attention(Var(h), Var(a), Var(r), std::vector<char>{0, 1, 0});
  CHECK(one.weights.value()[1] == 1.0);
  CHECK(one.rows.value().at(1, 0) == h.at(1, 0));

  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const auto e1 = encoder::word_attention(Var(h), Var(eye), Var(Tensor::vector({1, 0})), std::vector<char>(3, 1));
  double z = 0.0;
  for (std::size_t t = 0; t < 3; ++t) z += std::exp(h.at(t, 0));
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(e1.weights.value()[t] == doctest::Approx(std::exp(h.at(t, 0)) / z).epsilon(1e-14));
  }

  // Scaling A sharpens or flattens the weights but keeps the argmax.
  auto argmax = [](const Tensor& w) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
      if (w[i] > w[best]) best = i;
    return best;
  };
  const Tensor big = random_tensor(Shape{5, 2}, rng);
  const std::vector<char> mask(5, 1);
  const auto base = encoder::word_attention(Var(big), Var(a), Var(r), mask);
  for (double c : {0.1, 3.0, 20.0}) {
    const auto scaled = encoder::word_attention(Var(big), ops::scale(Var(a), c), Var(r), mask);
    CHECK(argmax(scaled.weights.value()) == argmax(base.weights.value()));
  }
}

// capsule -------------------------------------------------------------------

TEST_CASE("squash at unit and ten-fold norm") {
  const Tensor one = capsule::squash(Var(Tensor::matrix(1, 2, {0.6, 0.8}))).value();
  CHECK(std::hypot(one[0], one[1]) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(one[0] / one[1] == doctest::Approx(0.75).epsilon(1e-15));
  const Tensor ten = capsule::squash(Var(Tensor::matrix(1, 2, {6, 8}))).value();
  CHECK(std::hypot(ten[0], ten[1]) == doctest::Approx(100.0 / 100.5).epsilon(1e-15));

  Rng rng(6);
  double prev = 0.0;
  for (double n = 0.01; n < 50; n *= 1.7) {
    const Tensor s = capsule::squash(Var(Tensor::matrix(1, 2, {n, 0}))).value();
    CHECK(s[0] > prev);
    CHECK(s[0] < 1.0);
    prev = s[0];
  }
}

TEST_CASE("primary capsules: counts, zero input and a hand-set filter pair") {
  Rng rng(7);
  const auto c3 = capsule::primary_capsules(Var(random_tensor(Shape{3, 4}, rng)),
                                            Var(random_tensor(Shape{6, 8}, rng)),
                                            Var(Tensor(Shape{6})), 2, 3);
  CHECK(c3.u.shape() == Shape{4 * 2, 3});

  const auto zero = capsule::primary_capsules(Var(Tensor(Shape{3, 4})),
                                              Var(random_tensor(Shape{6, 8}, rng)),
                                              Var(Tensor(Shape{6})), 2, 3);
  CHECK(zero.u.value() == Tensor(Shape{8, 3}));
  CHECK(zero.activation.value() == Tensor(Shape{8}));

  // One row x = e_1 of width 2; window 0 sees [pad, x], window 1 sees [x, pad].
  const Tensor x = Tensor::matrix(1, 2, {1, 0});
  const Tensor f = Tensor::matrix(2, 4, {0.5, 0.0, 2.0, 0.0, -1.0, 0.0, 0.3, 9.0});
  const auto hand = capsule::primary_capsules(Var(x), Var(f), Var(Tensor(Shape{2})), 1, 2);
  const auto w0 = capsre::testing::squash_oracle({2.0, 0.3});
  const auto w1 = capsre::testing::squash_oracle({0.5, -1.0});
  CHECK(hand.u.value().at(0, 0) == doctest::Approx(w0[0]).epsilon(1e-15));
  CHECK(hand.u.value().at(0, 1) == doctest::Approx(w0[1]).epsilon(1e-15));
  CHECK(hand.u.value().at(1, 0) == doctest::Approx(w1[0]).epsilon(1e-15));
  CHECK(hand.u.value().at(1, 1) == doctest::Approx(w1[1]).epsilon(1e-15));
}

TEST_CASE("votes: identity, zero and a 2x2 product") {
  Rng rng(8);
  const Tensor u = random_tensor(Shape{3, 2}, rng);
  const capsule::CapsuleSet set{Var(u), Var(Tensor(Shape{3}))};
  const Tensor eye = Tensor(Shape{2, 2, 2}, std::vector<double>{1, 0, 0, 1, 1, 0, 0, 1});
  const Tensor v = capsule::votes(set, Var(eye), Var(Tensor(Shape{2, 2}))).value();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) CHECK(v.at(i, j, k) == u.at(i, k));

  const capsule::CapsuleSet none{Var(Tensor(Shape{3, 2})), Var(Tensor(Shape{3}))};
  CHECK(capsule::votes(none, Var(eye), Var(Tensor(Shape{2, 2}))).value() == Tensor(Shape{3, 2, 2}));

  const capsule::CapsuleSet one{Var(Tensor::matrix(1, 2, {5, 6})), Var(Tensor(Shape{1}))};
  const Tensor w = Tensor(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor p = capsule::votes(one, Var(w), Var(Tensor(Shape{1, 2}))).value();
  CHECK(p.at(0, 0, 0) == 17.0);
  CHECK(p.at(0, 0, 1) == 39.0);
}

TEST_CASE("routing: symmetric parents, silent children and parent permutation") {
  const Tensor same(Shape{1, 2, 3}, std::vector<double>{0.2, -0.4, 0.9, 0.2, -0.4, 0.9});
  const auto r = capsule::dynamic_routing(Var(same), Var(Tensor::vector({0.8})), 3);
  CHECK(r.parents.value().at(0, 1) == r.parents.value().at(1, 1));
  CHECK(r.activation.value()[0] == r.activation.value()[1]);

  Rng rng(9);
  const Tensor votes = random_tensor(Shape{4, 3, 2}, rng);
  const auto quiet = capsule::dynamic_routing(Var(votes), Var(Tensor(Shape{4})), 3);
  CHECK(quiet.activation.value() == Tensor(Shape{3}));
  CHECK(quiet.parents.value() == Tensor(Shape{3, 2}));

  const Tensor act = random_tensor(Shape{4}, rng, 0.0, 1.0);
  const std::size_t perm[] = {2, 0, 1};
  Tensor permuted(Shape{4, 3, 2});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 2; ++k) permuted.at(i, j, k) = votes.at(i, perm[j], k);
  const auto a = capsule::dynamic_routing(Var(votes), Var(act), 3);
  const auto b = capsule::dynamic_routing(Var(permuted), Var(act), 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(b.activation.value()[j] == doctest::Approx(a.activation.value()[perm[j]]).epsilon(1e-14));
  }
}

// training ------------------------------------------------------------------

TEST_CASE("margin boundaries and selection fixtures") {
  CHECK(margin_loss(Var(Tensor::vector({0.9})), std::vector<int>{0}).total.value().item() == 0.0);
  CHECK(margin_loss(Var(Tensor::vector({0.9, 0.1})), std::vector<int>{0}).per_relation[1] == 0.0);
  const std::vector<Tensor> bag{Tensor::vector({0.0, 0.2}), Tensor::vector({0.0, 0.7}),
                                Tensor::vector({0.0, 0.7})};
  CHECK(select_instance(bag, std::vector<int>{1}) == 1);

  Rng rng(10);
  const TrainConfig c = capsre::testing::tiny_config();
  const auto table = std::make_shared<const Tensor>(random_tensor(Shape{6, c.word_dim}, rng));
  const Model m = build_model(c, table, 5);
  data::Bag single;
  single.labels = {1};
  single.instances.push_back(capsre::testing::random_instance(rng, 4, 5, c));
  CHECK(select_instance(single, m) == 0);

  // Three instances, two gold relations: brute force over the 3x2 grid.
  data::Bag three = single;
  three.labels = {1, 2};
  for (int i = 0; i < 2; ++i) three.instances.push_back(capsre::testing::random_instance(rng, 5, 5, c));
  std::size_t want = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor s = m.scores(three.instances[i]);
    for (int k : three.labels) {
      if (s[static_cast<std::size_t>(k)] > best) {
        best = s[static_cast<std::size_t>(k)];
        want = i;
      }
    }
  }
  CHECK(select_instance(three, m) == want);
}

TEST_CASE("zero epochs leave parameters as built, and reruns are bit-identical") {
  ScratchDir dir("ex_train");
  SynthSpec spec;
  spec.bags = 8;
  spec.test_bags = 2;
  spec.word_dim = 6;
  auto s = capsre::testing::synth_run(spec, dir.path(), [](TrainConfig& c) {
    capsre::testing::shrink(c);
    c.dropout = 0.5;
    c.epochs = 0;
  });
  const Model fresh = build_model(s.run.train, s.inputs.words, s.inputs.unk);
  const Model idle = train_model(s.run.train, s.inputs);
  for (std::size_t i = 0; i < fresh.params().size(); ++i) {
    CHECK(*fresh.params()[i].value == *idle.params()[i].value);
  }
  TrainConfig two = s.run.train;
  two.epochs = 2;
  const Model a = train_model(two, s.inputs);
  const Model b = train_model(two, s.inputs);
  for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(*a.params()[i].value == *b.params()[i].value);
}

TEST_CASE("default sizes: attention matrix is 600 x 600") {
  TrainConfig c;
  c.relations = {"NA", "r"};
  Rng rng(1);
  const ParameterSet p = build_parameters(c, rng);
  CHECK(p.get("attn.A").value->shape() == Shape{600, 600});
  CHECK(p.get("attn.r").value->shape() == Shape{600});
  c.capsule = false;
  Rng rng2(1);
  const ParameterSet q = build_parameters(c, rng2);
  CHECK_FALSE(q.contains("caps.filters"));
  CHECK_FALSE(q.contains("caps.transforms"));
}

// prediction ----------------------------------------------------------------

TEST_CASE("ranking and top-two fixtures") {
  auto ids = [](const std::vector<RankedRelation>& r) {
    std::vector<int> out;
    for (const auto& x : r) out.push_back(x.id);
    return out;
  };
  CHECK(ids(predict_single(std::vector<double>{0.1, 0.9, 0.5})) == std::vector<int>{1, 2, 0});
  CHECK(ids(predict_single(std::vector<double>{0.4, 0.4, 0.4, 0.4})) == std::vector<int>{0, 1, 2, 3});
  CHECK(ids(predict_multi(std::vector<double>{0.9, 0.8, 0.3})) == std::vector<int>{0, 1});
  CHECK(ids(predict_multi(std::vector<double>{0.9, 0.6, 0.3})) == std::vector<int>{0});
  CHECK(predict_multi(std::vector<double>{0.7, 0.6, 0.3}).empty());
}

TEST_CASE("TransE fixtures: single pair, hand distances, swapped entities") {
  data::EmbeddingStore s;
  s.relations = data::EmbeddingTable({"NA", "r"}, Tensor::matrix(2, 2, {0, 0, 1, 0}));
  s.entities = data::EmbeddingTable({"a1", "a2", "b1", "b2"},
                                    Tensor::matrix(4, 2, {0, 0, 1, 0, 2, 2, 2, 3}));
  const std::vector<data::EntityPair> one{{"b1", "b2"}};
  CHECK(assign_relation(one, 1, s).pair == 0);
  const std::vector<data::EntityPair> two{{"a1", "a2"}, {"b1", "b2"}};
  const Assignment a = assign_relation(two, 1, s);
  CHECK(a.pair == 0);
  CHECK(a.distance == 0.0);
  const std::vector<data::EntityPair> b_only{{"b1", "b2"}};
  CHECK(assign_relation(b_only, 1, s).distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const std::vector<data::EntityPair> swapped{{"a2", "a1"}};
  CHECK(assign_relation(swapped, 1, s).distance == 2.0);
}

// evaluation ----------------------------------------------------------------

TEST_CASE("curve fixtures: perfect, all wrong, singleton") {
  std::vector<ScoredDecision> perfect;
  for (int i = 0; i < 6; ++i) perfect.push_back({"k", 1, 1.0 - 0.1 * i, i < 3});
  for (const auto& p : pr_curve(perfect)) {
    if (p.recall < 1.0) CHECK(p.precision == 1.0);
  }
  const auto pc = pr_curve(perfect);
  CHECK(pc[2] == CurvePoint{1.0, 1.0});
  CHECK(auc(pc) == 1.0);

  std::vector<ScoredDecision> wrong;
  for (int i = 0; i < 6; ++i) wrong.push_back({"k", 1, 1.0 - 0.1 * i, i >= 4});
  const auto wc = pr_curve(wrong);
  CHECK(wc.back().recall == 1.0);
  CHECK(wc.back().precision == 2.0 / 6);

  const std::vector<ScoredDecision> single{{"k", 1, 0.3, true}};
  CHECK(pr_curve(single) == std::vector<CurvePoint>{{1.0, 1.0}});

  auto doubled = wrong;
  doubled.insert(doubled.end(), wrong.begin(), wrong.end());
  CHECK(pr_curve(doubled) == wc);
}

TEST_CASE("precision and area fixtures") {
  const std::vector<CurvePoint> flat{{0.1, 0.8}, {0.25, 0.8}, {0.5, 0.8}, {1.0, 0.8}};
  for (const auto& p : precision_at(flat)) CHECK(*p == 0.8);
  const std::vector<CurvePoint> shortc{{0.1, 0.9}, {0.25, 0.6}};
  const auto at = precision_at(shortc);
  CHECK(at[0].has_value());
  CHECK(at[1].has_value());
  CHECK_FALSE(at[2].has_value());
  CHECK_FALSE(at[3].has_value());
  const std::vector<CurvePoint> half{{0.5, 0.5}, {1.0, 0.5}};
  CHECK(auc(half) == 0.5);
}

TEST_CASE("an empty grid gives an empty table") {
  const nlohmann::ordered_json grid = nlohmann::ordered_json::object();
  const auto points = experiment_sweep(TrainConfig{}, grid, Inputs{});
  CHECK(points.empty());
  const std::string report = sweep_report(grid, points);
  std::istringstream in(report);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("|", 0) == 0 && line.rfind("|---", 0) != 0) ++rows;
  }
  CHECK(rows == 1);  // header only
}

// cli -----------------------------------------------------------------------

namespace {

int run(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "capsre");
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  return code;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("synth output: labels, line count and seed determinism") {
  ScratchDir a("ex_synth_a"), b("ex_synth_b");
  REQUIRE(run({"synth", "--out", a.path().string(), "--relations", "4", "--bags", "50"}) == 0);
  REQUIRE(run({"synth", "--out", b.path().string(), "--relations", "4", "--bags", "50"}) == 0);
  CHECK(count_lines(capsre::testing::read_file(a / "train.jsonl")) >= 50);
  CHECK(count_lines(capsre::testing::read_file(a / "relations.txt")) == 4);
  for (const char* f : {"train.jsonl", "test.jsonl", "words.txt", "entities.txt", "relations.txt"}) {
    CHECK(capsre::testing::read_file(a / f) == capsre::testing::read_file(b / f));
  }
}

TEST_CASE("eval is repeatable and multi predict assigns pairs") {
  ScratchDir dir("ex_cli");
  REQUIRE(run({"synth", "--out", dir.path().string(), "--pairs", "2", "--bags", "8",
               "--test-bags", "4", "--word-dim", "6"}) == 0);
  const std::string cfg = (dir / "config.json").string();
  const std::vector<std::string> small{"--set", "hidden=6", "--set", "capsule_dim=3", "--set",
                                       "capsule_channels=2", "--set", "max_len=30", "--set",
                                       "epochs=1"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), small.begin(), small.end());
    return args;
  };
  REQUIRE(run(with({"train", "-c", cfg})) == 0);
  std::string e1, e2;
  REQUIRE(run(with({"eval", "-c", cfg}), &e1) == 0);
  REQUIRE(run(with({"eval", "-c", cfg}), &e2) == 0);
  CHECK(e1 == e2);

  // Surviving relations each carry a pair, and two survivors use both pairs.
  std::string out;
  REQUIRE(run(with({"predict", "-c", cfg, "--multi", "--threshold", "1e-9"}), &out) == 0);
  std::istringstream lines(out);
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    const auto& rels = j["relations"];
    CHECK(rels.size() <= 2);
    for (const auto& r : rels) CHECK(r["pair"].is_array());
    if (rels.size() == 2) CHECK(rels[0]["pair"] != rels[1]["pair"]);
  }
}
