#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "capsre/grad_check.hpp"
#include "capsre/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capsre;
using capsre::testing::between;
using capsre::testing::ScratchDir;

namespace {

SynthSpec small_spec(std::uint64_t seed = 3) {
  SynthSpec s;
  s.vocab = 30;
  s.bags = 16;
  s.test_bags = 4;
  s.word_dim = 8;
  s.seed = seed;
  return s;
}

bool same_params(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(*a[i].value == *b[i].value)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("margin loss boundary values") {
  const std::vector<int> one{0};
  CHECK(margin_loss(Var(Tensor::vector({0.0})), one).total.value().item() ==
        doctest::Approx(0.81).epsilon(1e-15));
  CHECK(margin_loss(Var(Tensor::vector({1.0, 0.9})), std::vector<int>{1}).total.value().item() ==
        doctest::Approx(0.405).epsilon(1e-15));
  // Inside both margins the loss is exactly zero.
  const auto zero = margin_loss(Var(Tensor::vector({0.1, 0.95, 0.0, 0.9})), std::vector<int>{1, 3});
  CHECK(zero.total.value().item() == 0.0);
  CHECK(zero.per_relation == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS((void)margin_loss(Var(Tensor::vector({0.5})), std::vector<int>{1}),
                  ContractViolation);
}

TEST_CASE("margin loss matches the oracle and its gradient on random activations") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t e = between(rng, 1, 8);
    Tensor a(Shape{e});
    std::vector<int> y(e, 0), gold;
    for (std::size_t k = 0; k < e; ++k) {
      a[k] = rng.uniform(0.0, 1.0);
      if (rng.below(3) == 0) {
        y[k] = 1;
        gold.push_back(static_cast<int>(k));
      }
    }
    const auto report = margin_loss(Var(a), gold);
    CHECK(report.total.value().item() ==
          doctest::Approx(capsre::testing::margin_loss_oracle(a.storage(), y)).epsilon(1e-14));
    double sum = 0.0;
    for (double l : report.per_relation) sum += l;
    CHECK(sum == doctest::Approx(report.total.value().item()).epsilon(1e-14));
    CHECK(grad_check([&](const Var& v) { return margin_loss(v, gold).total; }, a) < 1e-7);
  }
}

TEST_CASE("selection takes the best gold score with ties to the lowest index") {
  const std::vector<Tensor> bag{Tensor::vector({0.9, 0.2}), Tensor::vector({0.1, 0.7}),
                                Tensor::vector({0.0, 0.7})};
  CHECK(select_instance(bag, std::vector<int>{1}) == 1);
  CHECK(select_instance(bag, std::vector<int>{0}) == 0);

  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = between(rng, 1, 5), e = between(rng, 2, 5);
    std::vector<Tensor> scores;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor t(Shape{e});
      // Coarse values so ties happen.
      for (double& x : t.data()) x = static_cast<double>(rng.below(4)) / 4.0;
      scores.push_back(t);
    }
    const std::vector<int> gold{0, static_cast<int>(e - 1)};
    std::size_t want = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::max(scores[i][0], scores[i][e - 1]);
      if (s > best) {
        best = s;
        want = i;
      }
    }
    CHECK(select_instance(scores, gold) == want);
  }
  CHECK_THROWS_AS((void)select_instance(std::vector<Tensor>{}, std::vector<int>{1}),
                  ContractViolation);
}

TEST_CASE("unselected instances do not touch the loss or gradients") {
  Rng rng(33);
  const TrainConfig c = capsre::testing::tiny_config();
  const auto table = std::make_shared<const Tensor>(
      capsre::testing::random_tensor(Shape{12, c.word_dim}, rng));
  Model m = build_model(c, table, 11);
  Trainer trainer(m);

  data::Bag bag;
  bag.key = "h#t";
  bag.labels = {1};
  for (int i = 0; i < 3; ++i) bag.instances.push_back(capsre::testing::random_instance(rng, 5, 11, c));
  Rng d0(1);
  const BagStep base = trainer.bag_step(bag, d0);
  const std::size_t other = base.loss.selected_instance == 0 ? 1 : 0;

  int checked = 0;
  for (int attempt = 0; attempt < 20 && checked < 5; ++attempt) {
    data::Bag changed = bag;
    for (auto& id : changed.instances[other].word_ids) id = static_cast<std::int64_t>(rng.below(11));
    if (select_instance(changed, m) != base.loss.selected_instance) continue;
    Rng d1(1);
    const BagStep step = trainer.bag_step(changed, d1);
    CHECK(step.loss.total.value().item() == base.loss.total.value().item());
    for (std::size_t p = 0; p < m.params().size(); ++p) CHECK(step.grads.of(p) == base.grads.of(p));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("training reduces loss, keeps lr=0 fixed and ignores thread count") {
  ScratchDir dir("train");
  const auto s = capsre::testing::synth_run(small_spec(), dir.path(), capsre::testing::shrink);
  const TrainConfig& c = s.run.train;

  Model m = build_model(c, s.inputs.words, s.inputs.unk);
  Trainer t(m);
  std::vector<double> losses;
  for (int e = 0; e < 5; ++e) {
    const EpochStats st = t.train_epoch(s.inputs.train);
    CHECK(st.epoch == static_cast<std::size_t>(e + 1));
    CHECK(st.bags == s.inputs.train.size());
    CHECK(st.steps == (s.inputs.train.size() + c.batch_size - 1) / c.batch_size);
    std::size_t hist = 0;
    for (auto h : st.selection_histogram) hist += h;
    CHECK(hist == st.bags);
    losses.push_back(st.mean_loss);
  }
  for (std::size_t e = 1; e < losses.size(); ++e) CHECK(losses[e] < losses[e - 1]);

  TrainConfig frozen = c;
  frozen.lr = 0.0;
  Model f = build_model(frozen, s.inputs.words, s.inputs.unk);
  const ParameterSet before = f.params().clone();
  Trainer tf(f);
  (void)tf.train_epoch(s.inputs.train);
  CHECK(same_params(before, f.params()));

  TrainConfig noisy = c;
  noisy.dropout = 0.3;
  const int saved = omp_get_max_threads();
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Model mm = build_model(noisy, s.inputs.words, s.inputs.unk);
    Trainer tt(mm);
    (void)tt.train_epoch(s.inputs.train);
    (void)tt.train_epoch(s.inputs.train);
    return mm.params().clone();
  };
  const ParameterSet one = run(1);
  const ParameterSet four = run(4);
  omp_set_num_threads(saved);
  CHECK(same_params(one, four));
}

TEST_CASE("checkpoints round-trip and resume the same trajectory") {
  ScratchDir dir("ckpt");
  auto s = capsre::testing::synth_run(small_spec(4), dir.path(), [](TrainConfig& c) {
    capsre::testing::shrink(c);
    c.dropout = 0.2;
  });
  const TrainConfig& c = s.run.train;

  Model straight = build_model(c, s.inputs.words, s.inputs.unk);
  Trainer ts(straight);
  (void)ts.train_epoch(s.inputs.train);
  (void)ts.train_epoch(s.inputs.train);

  Model half = build_model(c, s.inputs.words, s.inputs.unk);
  Trainer th(half);
  (void)th.train_epoch(s.inputs.train);
  save_checkpoint(dir / "m.ckpt", th);
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));

  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  CHECK(ck.epochs_done == 1);
  CHECK(ck.config.hidden == c.hidden);
  Rng scratch(0);
  const ParameterSet expected = build_parameters(ck.config, scratch);
  Model resumed(ck.config, s.inputs.words, s.inputs.unk, checkpoint_parameters(ck, expected));
  CHECK(same_params(resumed.params(), half.params()));
  Trainer tr(resumed);
  tr.restore(ck.epochs_done, ck.rng_state, ck.adam_steps, ck.adam_m, ck.adam_v);
  (void)tr.train_epoch(s.inputs.train);
  CHECK(same_params(resumed.params(), straight.params()));

  TrainConfig wider = ck.config;
  wider.hidden = c.hidden + 1;
  Rng r2(0);
  try {
    (void)checkpoint_parameters(ck, build_parameters(wider, r2));
    FAIL("expected CheckedFailure");
  } catch (const CheckedFailure& e) {
    const std::string msg = e.what();
    CHECK(msg.find(Shape{c.input_width(), 4 * c.hidden}.str()) != std::string::npos);
    CHECK(msg.find(Shape{c.input_width(), 4 * wider.hidden}.str()) != std::string::npos);
  }

  capsre::testing::write_file(dir / "bad.ckpt", "{\"format\":\"other\"}");
  CHECK_THROWS_AS((void)load_checkpoint(dir / "bad.ckpt"), CheckedFailure);
  CHECK_THROWS_AS((void)load_checkpoint(dir / "absent.ckpt"), CheckedFailure);
}
