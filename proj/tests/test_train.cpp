#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "ecgdnn/train.hpp"
#include "support.hpp"

using namespace ecgdnn;

namespace {

TrainLog log_of(const std::vector<double>& val_losses) {
  TrainLog log;
  for (std::size_t i = 0; i < val_losses.size(); ++i)
    log.epochs.push_back({static_cast<int>(i + 1), 0.0, val_losses[i], 0.0, 0.0});
  return log;
}

// Learning rate used at each epoch, fed through the scheduler one epoch at a time.
std::vector<double> lr_trace(const std::vector<double>& val_losses, double lr0 = 1e-3) {
  PlateauScheduler s(lr0, 7, 0.1);
  std::vector<double> out;
  for (double v : val_losses) {
    out.push_back(s.lr());
    s.observe(v);
  }
  return out;
}

LabeledSet random_set(std::size_t n, std::uint64_t seed, const std::string& prefix) {
  LabeledSet set;
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nd(0.0f, 0.3f);
  for (std::size_t i = 0; i < n; ++i) {
    NetworkInput in;
    in.signal_length = kWindowLength;
    for (auto& v : in.data) v = nd(g);
    LabelVector y{};
    for (std::size_t c = 0; c < kNumClasses; ++c) y[c] = (g() % 3) == 0;
    set.inputs.push_back(std::move(in));
    set.labels.push_back(y);
    set.exam_ids.push_back(prefix + std::to_string(i));
  }
  return set;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("adam first step is lr over one plus epsilon") {
  Tensor<double> x(Shape{1}, 2.0);
  std::vector<Tensor<double>*> params{&x};
  AdamState<double> state;
  adam_step(std::span<Tensor<double>* const>(params), {Tensor<double>(Shape{1}, 1.0)}, state, 0.01);
  CHECK(x[0] == doctest::Approx(2.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(state.step == 1);
  CHECK(state.first_moment[0][0] == doctest::Approx(0.1));
  CHECK(state.second_moment[0][0] == doctest::Approx(0.001));
}

TEST_CASE("adam with zero gradients is a no-op") {
  auto x = testing::random_tensor<float>({3, 4}, 1);
  const auto before = x;
  std::vector<Tensor<float>*> params{&x};
  AdamState<float> state;
  for (int i = 0; i < 50; ++i)
    adam_step(std::span<Tensor<float>* const>(params), {Tensor<float>(x.shape())}, state, 0.1);
  CHECK(x == before);
  for (float v : state.first_moment[0].data()) CHECK(v == 0.0f);
  for (float v : state.second_moment[0].data()) CHECK(v == 0.0f);
}

TEST_CASE("adam minimizes a parabola") {
  Tensor<double> x(Shape{1}, 5.0);
  std::vector<Tensor<double>*> params{&x};
  AdamState<double> state;
  for (int i = 0; i < 2000; ++i)
    adam_step(std::span<Tensor<double>* const>(params), {Tensor<double>(Shape{1}, 2.0 * x[0])}, state, 0.1);
  CHECK(std::abs(x[0]) < 1e-3);
}

TEST_CASE("adam rejects mismatched gradients") {
  Tensor<float> x(Shape{2});
  std::vector<Tensor<float>*> params{&x};
  AdamState<float> state;
  CHECK_THROWS_AS(adam_step(std::span<Tensor<float>* const>(params), {Tensor<float>(Shape{3})}, state, 0.1),
                  ShapeError);
}

TEST_CASE("plateau rule") {
  SUBCASE("improving losses keep the rate") {
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(1.0 - 0.01 * i);
    for (double lr : lr_trace(v)) CHECK(lr == 1e-3);
  }
  SUBCASE("seven flat epochs decay at the eighth") {
    const auto t = lr_trace(std::vector<double>(10, 1.0));
    // Epoch 1 sets the best; epochs 2..8 are the seven without improvement.
    for (int e = 0; e < 8; ++e) CHECK(t[e] == 1e-3);
    CHECK(t[8] == doctest::Approx(1e-4));
  }
  SUBCASE("equal loss is not an improvement") {
    PlateauScheduler s(1e-3, 7, 0.1);
    s.observe(1.0);
    s.observe(1.0);
    CHECK(s.epochs_without_improvement() == 1);
    s.observe(0.5);
    CHECK(s.epochs_without_improvement() == 0);
  }
  SUBCASE("two plateaus give two decays") {
    // improving 5, flat 7, improving 1, flat 7, then more flat
    std::vector<double> v{1.0, 0.9, 0.8, 0.7, 0.6};
    for (int i = 0; i < 7; ++i) v.push_back(0.65);
    v.push_back(0.5);
    for (int i = 0; i < 7; ++i) v.push_back(0.55);
    for (int i = 0; i < 3; ++i) v.push_back(0.55);
    std::vector<double> expected;
    for (int i = 0; i < 12; ++i) expected.push_back(1e-3);
    for (int i = 0; i < 8; ++i) expected.push_back(1e-4);
    for (int i = 0; i < 3; ++i) expected.push_back(1e-5);
    const auto t = lr_trace(v);
    REQUIRE(t.size() == expected.size());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("lr_schedule replays a log") {
  std::vector<double> v{1.0, 0.9};
  CHECK(lr_schedule(log_of(v), 1e-3) == 1e-3);
  for (int i = 0; i < 6; ++i) v.push_back(0.95);
  CHECK(lr_schedule(log_of(v), 1e-3) == 1e-3);
  v.push_back(0.95);
  CHECK(lr_schedule(log_of(v), 1e-3) == doctest::Approx(1e-4));
  v.push_back(0.95);
  CHECK(lr_schedule(log_of(v), 1e-4) == 1e-4);
  CHECK(lr_schedule(TrainLog{}, 1e-3) == 1e-3);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr_decay_factor = 1.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.lr0 = -1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("splits") {
  std::vector<SplitKey> keys;
  for (int p = 0; p < 3; ++p)
    for (int e = 0; e < 2; ++e) keys.push_back({"e" + std::to_string(2 * p + e), "p" + std::to_string(p)});
  const std::vector<double> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};

  SUBCASE("by patient keeps patients whole") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = split_dataset(keys, SplitMode::ByPatient, thirds, seed);
      std::size_t total = 0;
      for (std::size_t a = 0; a < s.size(); ++a) {
        total += s[a].size();
        for (std::size_t b = 0; b < s.size(); ++b) {
          if (a == b) continue;
          for (auto i : s[a])
            for (auto j : s[b]) CHECK(keys[i].patient_id != keys[j].patient_id);
        }
      }
      CHECK(total == keys.size());
    }
  }
  SUBCASE("fractions must sum to one") {
    const std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS_AS(split_dataset(keys, SplitMode::Random, bad, 1), InvalidSplit);
  }
  SUBCASE("random split is seeded") {
    const std::vector<double> f{0.5, 0.5};
    CHECK(split_dataset(keys, SplitMode::Random, f, 4) == split_dataset(keys, SplitMode::Random, f, 4));
    bool differs = false;
    for (std::uint64_t s = 5; s < 15; ++s)
      differs |= split_dataset(keys, SplitMode::Random, f, 4) != split_dataset(keys, SplitMode::Random, f, s);
    CHECK(differs);
  }
  SUBCASE("chronological keeps acquisition order") {
    const std::vector<double> f{0.5, 0.25, 0.25};
    std::vector<SplitKey> k8;
    for (int i = 0; i < 8; ++i) k8.push_back({"e" + std::to_string(i), "p" + std::to_string(i)});
    const auto s = split_dataset(k8, SplitMode::Chronological, f, 0);
    CHECK(s[0] == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(s[1] == std::vector<std::size_t>{4, 5});
    CHECK(s[2] == std::vector<std::size_t>{6, 7});
  }
  SUBCASE("mode names") {
    CHECK(parse_split_mode("by_patient") == SplitMode::ByPatient);
    CHECK(parse_split_mode("random") == SplitMode::Random);
    CHECK(parse_split_mode("chronological") == SplitMode::Chronological);
    CHECK_THROWS_AS(parse_split_mode("stratified"), InvalidSplit);
  }
}

TEST_CASE("fit refuses bad splits") {
  const auto train = random_set(2, 1, "t");
  const auto val = random_set(2, 2, "v");
  TrainConfig cfg;
  cfg.max_epochs = 1;
  CHECK_THROWS_AS(fit(Model::build({}, 1), LabeledSet{}, val, cfg), InvalidSplit);
  CHECK_THROWS_AS(fit(Model::build({}, 1), train, LabeledSet{}, cfg), InvalidSplit);
  CHECK_THROWS_AS(fit(Model::build({}, 1), train, train, cfg), InvalidSplit);
}

TEST_CASE("fit is deterministic and keeps the best validation snapshot") {
  const auto train = random_set(8, 3, "t");
  const auto val = random_set(4, 4, "v");
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 3;
  cfg.lr0 = 0.01;
  cfg.rng_seed = 9;
  const auto a = fit(Model::build({}, 5), train, val, cfg);
  const auto b = fit(Model::build({}, 5), train, val, cfg);
  CHECK(a.log.same_trajectory(b.log));
  REQUIRE(a.log.epochs.size() == 3);

  int argmin = 1;
  double best = a.log.epochs[0].val_loss;
  for (const auto& e : a.log.epochs)
    if (e.val_loss < best) best = e.val_loss, argmin = e.epoch;
  CHECK(a.log.best_epoch == argmin);
  CHECK(a.checkpoint.training.epoch == argmin);
  CHECK(evaluate_loss(a.checkpoint.model, val, 4) == doctest::Approx(best).epsilon(1e-12));

  int calls = 0;
  const auto stopped = fit(Model::build({}, 5), train, val, cfg, [&](const EpochReport& r) {
    ++calls;
    CHECK(r.val_probabilities.size() == val.size());
    return true;
  });
  CHECK(calls == 1);
  CHECK(stopped.log.epochs.size() == 1);
  CHECK(stopped.log.epochs[0].val_loss == a.log.epochs[0].val_loss);

  std::ostringstream os;
  a.log.write_csv(os);
  CHECK(os.str().rfind("epoch,train_loss,val_loss,lr,seconds\n", 0) == 0);
}

TEST_CASE("targets mirror labels") {
  const std::vector<LabelVector> y{LabelVector{{true, false, false, false, false, true}}};
  const auto t = make_targets(y);
  CHECK(t[0] == 1.0f);
  CHECK(t[1] == 0.0f);
  CHECK(t[5] == 1.0f);
}

}
