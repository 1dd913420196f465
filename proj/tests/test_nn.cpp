#include <cmath>
#include <filesystem>
#include <fstream>

#include "convrank/errors.hpp"
#include "convrank/nn.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace convrank;
using nn::Mat;
using nn::Vec;

namespace {

// High-precision scalar oracles, independent of the implementation path.
double osigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

nn::GruParams ones_weights_gru() {
  nn::GruParams p = nn::GruParams::zeros(1, 1);
  p.Wz(0, 0) = p.Wr(0, 0) = p.Wh(0, 0) = 1.0;
  p.Uz(0, 0) = p.Ur(0, 0) = p.Uh(0, 0) = 1.0;
  return p;  // biases stay zero
}

}  // namespace

TEST_CASE("gru_step: zero parameters give the zero fixed point") {
  const nn::GruParams p = nn::GruParams::zeros(3, 4);
  const Vec h = nn::gru_step(p, Vec::Random(3), Vec::Zero(4));
  CHECK(h.norm() == 0.0);
}

TEST_CASE("gru_step matches the scalar hand computation") {
  const nn::GruParams p = ones_weights_gru();
  Vec x = Vec::Constant(1, 1.0);
  Vec h0 = Vec::Zero(1);
  const Vec h = nn::gru_step(p, x, h0);

  const double z = osigmoid(1.0);
  const double r = osigmoid(1.0);
  const double hcand = std::tanh(1.0 + r * 0.0);
  const double expected = (1.0 - z) * 0.0 + z * hcand;
  CHECK(z == doctest::Approx(0.7311).epsilon(1e-3));
  CHECK(hcand == doctest::Approx(0.7616).epsilon(1e-3));
  CHECK(h(0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(h(0) == doctest::Approx(0.5568).epsilon(1e-3));
}

TEST_CASE("gru_step output length follows the hidden size") {
  Rng rng(2);
  const auto p = nn::GruParams::init(16, 128, rng);
  CHECK(nn::gru_step(p, Vec::Random(16), Vec::Random(128)).size() == 128);
}

TEST_CASE("gru_step rejects mismatched shapes") {
  const nn::GruParams p = nn::GruParams::zeros(3, 4);
  CHECK_THROWS_AS(nn::gru_step(p, Vec::Zero(2), Vec::Zero(4)), DataError);
  CHECK_THROWS_AS(nn::gru_step(p, Vec::Zero(3), Vec::Zero(5)), DataError);
}

TEST_CASE("gru_step stays in (-1,1) when h does") {
  Rng rng(4);
  const auto p = nn::GruParams::init(5, 7, rng);
  for (int trial = 0; trial < 200; ++trial) {
    Vec h(7);
    for (int i = 0; i < 7; ++i) h(i) = 2.0 * rng.next_double() - 1.0;
    Vec x(5);
    for (int i = 0; i < 5; ++i) x(i) = 4.0 * rng.next_double() - 2.0;
    const Vec h2 = nn::gru_step(p, x, h);
    for (int i = 0; i < 7; ++i) {
      CHECK(h2(i) > -1.0);
      CHECK(h2(i) < 1.0);
    }
  }
}

TEST_CASE("gru_encode: empty sequence gives the zero vector") {
  Rng rng(5);
  const auto p = nn::GruParams::init(4, 6, rng);
  Mat emb = Mat::Random(4, 10);
  CHECK(nn::gru_encode(p, emb, {}).isZero());
}

TEST_CASE("gru_encode: one token equals a single step, two equal the composition") {
  Rng rng(6);
  const auto p = nn::GruParams::init(4, 6, rng);
  Mat emb = Mat::Random(4, 10);
  const Vec one = nn::gru_encode(p, emb, {3});
  CHECK((one - nn::gru_step(p, emb.col(3), Vec::Zero(6))).norm() == 0.0);

  const Vec two = nn::gru_encode(p, emb, {3, 7});
  const Vec manual = nn::gru_step(p, emb.col(7), nn::gru_step(p, emb.col(3), Vec::Zero(6)));
  CHECK((two - manual).norm() == 0.0);
}

TEST_CASE("gru_encode rejects out-of-range ids") {
  Rng rng(6);
  const auto p = nn::GruParams::init(4, 6, rng);
  Mat emb = Mat::Random(4, 10);
  CHECK_THROWS_AS(nn::gru_encode(p, emb, {10}), DataError);
  CHECK_THROWS_AS(nn::gru_encode(p, emb, {-1}), DataError);
}

TEST_CASE("lstm_step matches the scalar hand oracle on all-ones weights") {
  nn::LstmParams p = nn::LstmParams::zeros(1, 1);
  p.Wi(0, 0) = p.Wf(0, 0) = p.Wo(0, 0) = p.Wg(0, 0) = 1.0;
  p.Ui(0, 0) = p.Uf(0, 0) = p.Uo(0, 0) = p.Ug(0, 0) = 1.0;
  p.bi(0) = p.bf(0) = p.bo(0) = p.bg(0) = 1.0;

  Vec c_out;
  const Vec h = nn::lstm_step(p, Vec::Constant(1, 1.0), Vec::Zero(1), Vec::Zero(1), &c_out);
  const double gate = osigmoid(2.0);
  const double g = std::tanh(2.0);
  const double c_expected = gate * g;
  const double h_expected = gate * std::tanh(c_expected);
  CHECK(c_out(0) == doctest::Approx(c_expected).epsilon(1e-15));
  CHECK(h(0) == doctest::Approx(h_expected).epsilon(1e-15));
}

TEST_CASE("mlp_forward: all-zero parameters output 0.5") {
  nn::MlpParams p;
  p.hidden.push_back(nn::DenseLayer::zeros(4, 3));
  p.out = nn::DenseLayer::zeros(1, 4);
  CHECK(nn::mlp_forward(p, Vec::Random(3)) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mlp_forward: single linear layer closed form") {
  nn::MlpParams p;
  p.out = nn::DenseLayer::zeros(1, 1);
  p.out.M(0, 0) = 1.0;
  CHECK(nn::mlp_forward(p, Vec::Constant(1, 2.0)) ==
        doctest::Approx(osigmoid(2.0)).epsilon(1e-15));
  CHECK(osigmoid(2.0) == doctest::Approx(0.8808).epsilon(1e-3));
}

TEST_CASE("mlp_forward output lies strictly inside (0,1)") {
  Rng rng(9);
  const auto p = nn::MlpParams::init(6, {8, 4}, rng);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(6);
    for (int i = 0; i < 6; ++i) x(i) = 20.0 * rng.next_double() - 10.0;
    const double y = nn::mlp_forward(p, x);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  CHECK_THROWS_AS(nn::mlp_forward(p, Vec::Zero(5)), DataError);
}

TEST_CASE("mse_loss arithmetic") {
  CHECK(nn::mse_loss({0.3, 0.8}, {0.3, 0.8}) == 0.0);
  CHECK(nn::mse_loss({0.5}, {1.0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(nn::mse_loss({0.0, 1.0}, {1.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(nn::mse_loss({}, {}), DataError);
  CHECK_THROWS_AS(nn::mse_loss({1.0}, {1.0, 2.0}), DataError);
}

// ---------------------------------------------------------------------------
// Finite-difference checks for the sequence encoders
// ---------------------------------------------------------------------------

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;

double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a) + std::abs(b), 1e-8);
  return std::abs(a - b) / denom;
}

// Loss = 0.5 * ||h_T||^2 over a fixed id sequence.
template <class Params, class Encode>
double encoder_loss(const Params& p, const Mat& emb, const std::vector<int>& ids, Encode encode) {
  const Vec h = encode(p, emb, ids);
  return 0.5 * h.squaredNorm();
}

template <class Params>
void fd_check(Params& p, Mat& emb, const std::vector<int>& ids,
              const std::vector<nn::ParamView>& params, const std::vector<nn::ParamView>& grads,
              const std::function<double()>& loss_fn) {
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t].size; ++i) {
      double& theta = params[t].data[i];
      const double saved = theta;
      theta = saved + kFdStep;
      const double up = loss_fn();
      theta = saved - kFdStep;
      const double down = loss_fn();
      theta = saved;
      const double fd = (up - down) / (2.0 * kFdStep);
      CHECK(rel_err(fd, grads[t].data[i]) < kFdTolerance);
    }
  }
}

}  // namespace

TEST_CASE("gru_backward matches central finite differences") {
  Rng rng(21);
  auto p = nn::GruParams::init(3, 4, rng);
  Mat emb = Mat::Zero(3, 6);
  nn::glorot_fill(emb, rng);
  const std::vector<int> ids{1, 4, 2, 1};

  nn::GruSequenceCache cache;
  const Vec h = nn::gru_encode(p, emb, ids, &cache);
  nn::GruParams grads = nn::GruParams::zeros(3, 4);
  Mat emb_grads = Mat::Zero(3, 6);
  nn::gru_backward(p, emb, cache, h, grads, emb_grads);

  auto params = nn::param_views("gru", p);
  nn::append_views(params, nn::param_views("emb", emb));
  auto grad_views = nn::param_views("gru", grads);
  nn::append_views(grad_views, nn::param_views("emb", emb_grads));
  fd_check(p, emb, ids, params, grad_views, [&] {
    return encoder_loss(p, emb, ids,
                        [](const auto& pp, const Mat& e, const std::vector<int>& s) {
                          return nn::gru_encode(pp, e, s);
                        });
  });
}

TEST_CASE("lstm_backward matches central finite differences") {
  Rng rng(22);
  auto p = nn::LstmParams::init(3, 4, rng);
  Mat emb = Mat::Zero(3, 6);
  nn::glorot_fill(emb, rng);
  const std::vector<int> ids{0, 5, 3};

  nn::LstmSequenceCache cache;
  const Vec h = nn::lstm_encode(p, emb, ids, &cache);
  nn::LstmParams grads = nn::LstmParams::zeros(3, 4);
  Mat emb_grads = Mat::Zero(3, 6);
  nn::lstm_backward(p, emb, cache, h, grads, emb_grads);

  auto params = nn::param_views("lstm", p);
  nn::append_views(params, nn::param_views("emb", emb));
  auto grad_views = nn::param_views("lstm", grads);
  nn::append_views(grad_views, nn::param_views("emb", emb_grads));
  fd_check(p, emb, ids, params, grad_views, [&] {
    return encoder_loss(p, emb, ids,
                        [](const auto& pp, const Mat& e, const std::vector<int>& s) {
                          return nn::lstm_encode(pp, e, s);
                        });
  });
}

TEST_CASE("mlp_backward matches central finite differences") {
  Rng rng(23);
  auto p = nn::MlpParams::init(5, {6, 3}, rng);
  Vec x(5);
  for (int i = 0; i < 5; ++i) x(i) = 2.0 * rng.next_double() - 1.0;
  const double target = 0.3;

  nn::MlpCache cache;
  const double prob = nn::mlp_forward(p, x, &cache);
  nn::MlpParams grads = p;
  grads.set_zero();
  nn::mlp_backward(p, cache, 2.0 * (prob - target), grads);

  auto params = nn::param_views("mlp", p);
  auto grad_views = nn::param_views("mlp", grads);
  auto loss = [&] {
    const double pr = nn::mlp_forward(p, x);
    return (pr - target) * (pr - target);
  };
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t].size; ++i) {
      double& theta = params[t].data[i];
      const double saved = theta;
      theta = saved + kFdStep;
      const double up = loss();
      theta = saved - kFdStep;
      const double down = loss();
      theta = saved;
      CHECK(rel_err((up - down) / (2.0 * kFdStep), grad_views[t].data[i]) < kFdTolerance);
    }
  }
}

// ---------------------------------------------------------------------------
// Adagrad
// ---------------------------------------------------------------------------

TEST_CASE("adagrad closed-form single step") {
  Vec theta = Vec::Constant(1, 1.0);
  Vec grad = Vec::Constant(1, 1.0);
  auto params = nn::param_views("theta", theta);
  auto grads = nn::param_views("theta", grad);
  nn::AdagradState state;
  state.learning_rate = 0.01;
  state.init(params);

  nn::adagrad_update(params, grads, state);
  CHECK(state.accumulators[0](0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(theta(0) == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(theta(0) == doctest::Approx(0.99).epsilon(1e-6));
}

TEST_CASE("adagrad: zero gradient leaves parameters and state unchanged") {
  Vec theta = Vec::Constant(3, 2.0);
  Vec grad = Vec::Zero(3);
  auto params = nn::param_views("theta", theta);
  auto grads = nn::param_views("theta", grad);
  nn::AdagradState state;
  state.init(params);
  nn::adagrad_update(params, grads, state);
  CHECK(theta(0) == 2.0);
  CHECK(state.accumulators[0](0) == 0.0);
}

TEST_CASE("adagrad: repeated unit gradients shrink the step") {
  Vec theta = Vec::Zero(1);
  Vec grad = Vec::Constant(1, 1.0);
  auto params = nn::param_views("theta", theta);
  auto grads = nn::param_views("theta", grad);
  nn::AdagradState state;
  state.learning_rate = 0.1;
  state.init(params);

  nn::adagrad_update(params, grads, state);
  const double first_step = std::abs(theta(0));
  const double before = theta(0);
  nn::adagrad_update(params, grads, state);
  const double second_step = std::abs(theta(0) - before);
  CHECK(second_step < first_step);
}

TEST_CASE("adagrad accumulators are entrywise non-decreasing") {
  Rng rng(31);
  Vec theta = Vec::Zero(8);
  Vec grad(8);
  auto params = nn::param_views("theta", theta);
  auto grads = nn::param_views("theta", grad);
  nn::AdagradState state;
  state.init(params);
  Eigen::ArrayXd prev = state.accumulators[0];
  for (int step = 0; step < 50; ++step) {
    for (int i = 0; i < 8; ++i) grad(i) = 2.0 * rng.next_double() - 1.0;
    nn::adagrad_update(params, grads, state);
    CHECK((state.accumulators[0] >= prev).all());
    prev = state.accumulators[0];
  }
}

TEST_CASE("adagrad rejects non-finite gradients") {
  Vec theta = Vec::Zero(2);
  Vec grad = Vec::Zero(2);
  grad(1) = std::numeric_limits<double>::quiet_NaN();
  auto params = nn::param_views("theta", theta);
  auto grads = nn::param_views("theta", grad);
  nn::AdagradState state;
  state.init(params);
  CHECK_THROWS_AS(nn::adagrad_update(params, grads, state), DataError);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip preserves meta and arrays bit for bit") {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", "probe"}, {"dims", {3, 4}}};
  ckpt.arrays.emplace_back("a", std::vector<float>{1.5f, -2.25f, 0.0f});
  ckpt.arrays.emplace_back("b", std::vector<float>{3.14159f});
  const std::string path = testutil::temp_path("convrank_ckpt_probe.ckpt");
  nn::save_checkpoint(ckpt, path);

  const nn::Checkpoint rt = nn::load_checkpoint(path);
  CHECK(rt.version == nn::kCheckpointVersion);
  CHECK(rt.meta == ckpt.meta);
  REQUIRE(rt.arrays.size() == 2);
  CHECK(rt.array("a") == ckpt.array("a"));
  CHECK(rt.array("b") == ckpt.array("b"));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint reader distinguishes bad magic, bad version, truncation") {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", "probe"}};
  ckpt.arrays.emplace_back("w", std::vector<float>(16, 1.0f));
  const std::string path = testutil::temp_path("convrank_ckpt_err.ckpt");
  nn::save_checkpoint(ckpt, path);
  const std::string bytes = testutil::slurp(path);

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(path, std::ios::binary) << bad;
    CHECK_THROWS_AS(nn::load_checkpoint(path), BadMagicError);
  }
  SUBCASE("future version") {
    std::string bad = bytes;
    bad[4] = static_cast<char>(nn::kCheckpointVersion + 1);
    std::ofstream(path, std::ios::binary) << bad;
    CHECK_THROWS_AS(nn::load_checkpoint(path), BadVersionError);
  }
  SUBCASE("truncated") {
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 10);
    CHECK_THROWS_AS(nn::load_checkpoint(path), TruncatedError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("snap_f32 + f32 round trip reproduces doubles exactly") {
  Rng rng(77);
  Mat m = Mat::Zero(7, 5);
  nn::glorot_fill(m, rng);
  auto views = nn::param_views("m", m);
  nn::snap_f32(views);
  const auto packed = nn::to_f32(m.data(), m.size());
  Mat restored = Mat::Zero(7, 5);
  nn::from_f32(packed, restored.data(), restored.size());
  CHECK((restored - m).norm() == 0.0);
}
