#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gridnet/cplx_nn.hpp"
#include "test_support.hpp"

using namespace gridnet;

using testsup::activation_margin;
using testsup::max_grad_rel_error;
using testsup::view_grads;
using testsup::view_params;
using ParamView = testsup::ParamView;

TEST_CASE("crelu basics") {
  CVec z(3);
  z << cxd{1.0, 1.0}, cxd{-1.0, 2.0}, cxd{-3.0, -4.0};
  const CVec out = crelu(z);
  CHECK(out(0) == cxd{1.0, 1.0});
  CHECK(out(1) == cxd{0.0, 2.0});
  CHECK(out(2) == cxd{0.0, 0.0});
}

TEST_CASE("crelu is non-expansive over random pairs") {
  Rng rng(1);
  for (int trial = 0; trial < 100000; ++trial) {
    const cxd z1{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const cxd z2{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const cxd a{std::max(0.0, z1.real()), std::max(0.0, z1.imag())};
    const cxd b{std::max(0.0, z2.real()), std::max(0.0, z2.imag())};
    CHECK(std::abs(a - b) <= std::abs(z1 - z2) + 1e-12);
  }
}

TEST_CASE("temporal convolution") {
  Rng rng(5);
  SUBCASE("selector kernel picks the first time column") {
    CMat kernel = CMat::Zero(4, 1);
    kernel(0, 0) = cxd{1.0, 0.0};
    const CMat x = rng.cnormal_mat(5, 4);
    CHECK((temporal_conv(kernel, x) - x.col(0)).norm() < 1e-14);
  }
  SUBCASE("zero input maps to zero") {
    const CMat kernel = rng.cnormal_mat(4, 3);
    CHECK(temporal_conv(kernel, CMat::Zero(5, 4)).norm() == 0.0);
  }
  SUBCASE("matches the scalar triple loop") {
    const CMat x = rng.cnormal_mat(5, 4);
    const CMat kernel = rng.cnormal_mat(4, 3);
    const CMat out = temporal_conv(kernel, x);
    for (int v = 0; v < 5; ++v)
      for (int c = 0; c < 3; ++c) {
        cxd expect{0.0, 0.0};
        for (int t = 0; t < 4; ++t) expect += x(v, t) * kernel(t, c);
        CHECK(std::abs(out(v, c) - expect) < 1e-13);
      }
  }
  SUBCASE("width mismatch throws") {
    CHECK_THROWS_AS(temporal_conv(CMat::Ones(3, 2), CMat::Ones(5, 4)),
                    InvalidArgument);
  }
}

TEST_CASE("graph convolution") {
  Rng rng(7);
  const CMat s = testsup::random_complex_symmetric(6, rng);

  SUBCASE("identity stack on first-quadrant inputs is the identity") {
    CMat xbar(2, 2);
    xbar << cxd{1.0, 2.0}, cxd{0.5, 0.1}, cxd{3.0, 0.2}, cxd{0.7, 1.1};
    const std::vector<CMat> stack{CMat::Identity(2, 2)};
    const CMat sgso = testsup::random_complex_symmetric(2, rng);
    CHECK((graph_conv(sgso, stack, xbar) - xbar).norm() == 0.0);
  }
  SUBCASE("zero input maps to zero") {
    const std::vector<CMat> stack{rng.cnormal_mat(3, 2), rng.cnormal_mat(3, 2)};
    CHECK(graph_conv(s, stack, CMat::Zero(6, 3)).norm() == 0.0);
  }
  SUBCASE("matches the dense power expansion followed by crelu") {
    std::vector<CMat> stack;
    for (int k = 0; k < 4; ++k) stack.push_back(rng.cnormal_mat(3, 2));
    const CMat xbar = rng.cnormal_mat(6, 3);
    CMat expect = CMat::Zero(6, 2);
    CMat power = CMat::Identity(6, 6);
    for (int k = 0; k < 4; ++k) {
      if (k > 0) power = CMat(power * s);
      expect += power * xbar * stack[k];
    }
    expect = crelu(expect);
    CHECK((graph_conv(s, stack, xbar) - expect).norm() <=
          1e-12 * (1.0 + expect.norm()));
  }
  SUBCASE("positive homogeneity of degree one") {
    std::vector<CMat> stack{rng.cnormal_mat(3, 2), rng.cnormal_mat(3, 2)};
    const CMat xbar = rng.cnormal_mat(6, 3);
    const double a = 2.7;
    CHECK((graph_conv(s, stack, CMat(a * xbar)) -
           a * graph_conv(s, stack, xbar))
              .norm() < 1e-11);
  }
  SUBCASE("permutation equivariance") {
    std::vector<CMat> stack{rng.cnormal_mat(3, 2), rng.cnormal_mat(3, 2),
                            rng.cnormal_mat(3, 2)};
    const CMat xbar = rng.cnormal_mat(6, 3);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.setIdentity();
    std::vector<int> order{3, 0, 5, 1, 4, 2};
    for (int i = 0; i < 6; ++i) perm.indices()(i) = order[i];

    const CMat ps = perm * s * perm.transpose();
    const CMat px = perm * xbar;
    const CMat lhs = graph_conv(ps, stack, px);
    const CMat rhs = perm * graph_conv(s, stack, xbar);
    CHECK((lhs - rhs).norm() <= 1e-11 * (1.0 + rhs.norm()));
  }
}

namespace {

StgcnConfig tiny_config(HeadKind head) {
  StgcnConfig cfg;
  cfg.nodes = 5;
  cfg.window = 3;
  cfg.spatial_order = 2;
  cfg.temporal_channels = 2;
  cfg.graph_channels = 2;
  cfg.hidden_widths = {8};
  cfg.head = head;
  cfg.output_dim = head == HeadKind::Regression ? 5 : 3;
  return cfg;
}

}  // namespace

TEST_CASE("forward pass") {
  Rng rng(11);
  const CMat s = testsup::random_complex_symmetric(5, rng);
  const CMat x = rng.cnormal_mat(5, 3);

  SUBCASE("all-zero parameters, classification head outputs one half") {
    StgcnModel m = init_stgcn(tiny_config(HeadKind::Classification), 3);
    ParamView v = view_params(m);
    for (auto [p, n] : v.complex_blocks)
      for (Eigen::Index i = 0; i < n; ++i) p[i] = cxd{0.0, 0.0};
    for (auto [p, n] : v.real_blocks)
      for (Eigen::Index i = 0; i < n; ++i) p[i] = 0.0;
    const auto out = forward(m, s, x);
    for (int i = 0; i < 3; ++i)
      CHECK(out.classification(i) == doctest::Approx(0.5));
  }
  SUBCASE("all-zero parameters, regression head outputs zero") {
    StgcnModel m = init_stgcn(tiny_config(HeadKind::Regression), 3);
    ParamView v = view_params(m);
    for (auto [p, n] : v.complex_blocks)
      for (Eigen::Index i = 0; i < n; ++i) p[i] = cxd{0.0, 0.0};
    const auto out = forward(m, s, x);
    CHECK(out.regression.norm() == 0.0);
  }
  SUBCASE("outputs respect the head ranges") {
    StgcnModel mr = init_stgcn(tiny_config(HeadKind::Regression), 5);
    const auto outr = forward(mr, s, CMat(4.0 * x));
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs(outr.regression(i).real()) < 1.0);
      CHECK(std::abs(outr.regression(i).imag()) < 1.0);
    }
    StgcnModel mc = init_stgcn(tiny_config(HeadKind::Classification), 5);
    const auto outc = forward(mc, s, CMat(4.0 * x));
    for (int i = 0; i < 3; ++i) {
      CHECK(outc.classification(i) > 0.0);
      CHECK(outc.classification(i) < 1.0);
    }
  }
  SUBCASE("shape mismatches throw") {
    StgcnModel m = init_stgcn(tiny_config(HeadKind::Regression), 5);
    CHECK_THROWS_AS(forward(m, s, CMat::Ones(5, 4)), InvalidArgument);
    CHECK_THROWS_AS(forward(m, CMat::Ones(4, 4), x), InvalidArgument);
  }
}

TEST_CASE("forward equals an independently coded straight-line evaluation") {
  Rng rng(13);
  StgcnModel m = init_stgcn(tiny_config(HeadKind::Regression), 77);
  const CMat s = testsup::random_complex_symmetric(5, rng);
  const CMat x = rng.cnormal_mat(5, 3);
  const auto out = forward(m, s, x);

  // Scalar re-implementation, no shared code with the library path.
  const int V = 5, T = 3, KT = 2, G = 2, K = 2, W = 8;
  std::vector<std::vector<cxd>> xbar(V, std::vector<cxd>(KT));
  for (int v = 0; v < V; ++v)
    for (int c = 0; c < KT; ++c) {
      cxd acc = m.temporal_bias(c);
      for (int t = 0; t < T; ++t) acc += x(v, t) * m.temporal_kernel(t, c);
      xbar[v][c] = acc;
    }
  // powers of S applied to xbar
  std::vector<std::vector<std::vector<cxd>>> pows(
      K + 1, std::vector<std::vector<cxd>>(V, std::vector<cxd>(KT)));
  pows[0] = xbar;
  for (int k = 1; k <= K; ++k)
    for (int v = 0; v < V; ++v)
      for (int c = 0; c < KT; ++c) {
        cxd acc{0.0, 0.0};
        for (int u = 0; u < V; ++u) acc += s(v, u) * pows[k - 1][u][c];
        pows[k][v][c] = acc;
      }
  std::vector<std::vector<cxd>> gact(V, std::vector<cxd>(G));
  for (int v = 0; v < V; ++v)
    for (int g = 0; g < G; ++g) {
      cxd acc = m.graph_bias(g);
      for (int k = 0; k <= K; ++k)
        for (int c = 0; c < KT; ++c)
          acc += pows[k][v][c] * m.graph_coeffs[k](c, g);
      gact[v][g] = cxd{std::max(0.0, acc.real()), std::max(0.0, acc.imag())};
    }
  std::vector<cxd> flat(V * G);
  for (int g = 0; g < G; ++g)
    for (int v = 0; v < V; ++v) flat[v + V * g] = gact[v][g];
  std::vector<cxd> hidden(W);
  for (int i = 0; i < W; ++i) {
    cxd acc = m.dense_b[0](i);
    for (int j = 0; j < V * G; ++j) acc += m.dense_w[0](i, j) * flat[j];
    hidden[i] = cxd{std::max(0.0, acc.real()), std::max(0.0, acc.imag())};
  }
  for (int o = 0; o < V; ++o) {
    cxd acc = m.head_b(o);
    for (int i = 0; i < W; ++i) acc += m.head_w(o, i) * hidden[i];
    const cxd expect{std::tanh(acc.real()), std::tanh(acc.imag())};
    CHECK(std::abs(out.regression(o) - expect) < 1e-12);
  }
}

TEST_CASE("forecast loss") {
  Rng rng(17);
  const int n = 5;
  const CMat s = testsup::random_complex_symmetric(n, rng);
  const std::vector<int> observed{0, 2, 4};
  const CVec y = rng.cnormal_vec(n);
  const CVec target = rng.cnormal_vec(n);
  const CVec v_meas = rng.cnormal_vec(3);
  const CVec i_meas = rng.cnormal_vec(3);

  SUBCASE("exact prediction with consistent physics has zero loss") {
    CVec vm(3), im(3);
    const CVec current = s * target;
    for (int a = 0; a < 3; ++a) {
      vm(a) = target(observed[a]);
      im(a) = current(observed[a]);
    }
    const auto loss = loss_forecast(target, target, vm, im, s, observed, 1e-4);
    CHECK(loss.value == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("mu2 zero reduces to the squared error") {
    const auto loss = loss_forecast(y, target, v_meas, i_meas, s, observed, 0.0);
    CHECK(loss.value == doctest::Approx((y - target).squaredNorm()));
  }
  SUBCASE("matches a scalar-loop evaluation") {
    const double mu2 = 0.3;
    const auto loss = loss_forecast(y, target, v_meas, i_meas, s, observed, mu2);
    double expect = 0.0;
    for (int i = 0; i < n; ++i) expect += std::norm(y(i) - target(i));
    for (int a = 0; a < 3; ++a) {
      cxd current{0.0, 0.0};
      for (int u = 0; u < n; ++u) current += s(observed[a], u) * y(u);
      const cxd q = y(observed[a]) * std::conj(current);
      expect += mu2 * std::norm(v_meas(a) * std::conj(i_meas(a)) - q);
    }
    CHECK(loss.value == doctest::Approx(expect));
  }
}

TEST_CASE("localization loss") {
  RVec y(4), labels(4);
  y << 0.9, 0.1, 0.5, 0.2;
  labels << 1, 0, 0, 0;

  SUBCASE("exact prediction has zero loss") {
    const auto loss = loss_localization(labels, labels);
    CHECK(loss.value == 0.0);
  }
  SUBCASE("uniform half against all-zero labels") {
    const RVec half = RVec::Constant(4, 0.5);
    const auto loss = loss_localization(half, RVec::Zero(4));
    CHECK(loss.value == doctest::Approx(0.25 * 4));
  }
  SUBCASE("matches the scalar loop") {
    const auto loss = loss_localization(y, labels);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) expect += (y(i) - labels(i)) * (y(i) - labels(i));
    CHECK(loss.value == doctest::Approx(expect));
    CHECK_THROWS_AS(loss_localization(y, RVec::Zero(3)), InvalidArgument);
  }
}

TEST_CASE("backward gradients match finite differences, regression head") {
  const CMat sraw = [] {
    Rng r(23);
    return testsup::random_complex_symmetric(5, r, 0.5);
  }();

  // Pick the first seed with a safe activation margin so the finite
  // differences never straddle a ReLU kink.
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Rng rng(1000 + seed);
    StgcnModel model = init_stgcn(tiny_config(HeadKind::Regression), seed);
    const CMat x = rng.cnormal_mat(5, 3);
    const CVec target = 0.3 * rng.cnormal_vec(5);
    const CVec v_meas = rng.cnormal_vec(3);
    const CVec i_meas = rng.cnormal_vec(3);
    const std::vector<int> observed{0, 1, 3};
    const double mu2 = 1e-2;

    const auto fwd = forward(model, sraw, x);
    if (activation_margin(fwd.cache) < 5e-4) continue;

    const auto loss =
        loss_forecast(fwd.regression, target, v_meas, i_meas, sraw, observed, mu2);
    GradientSet grads = backward(model, fwd.cache, loss.grad);

    auto loss_fn = [&]() {
      const auto f = forward(model, sraw, x);
      return loss_forecast(f.regression, target, v_meas, i_meas, sraw, observed,
                           mu2)
          .value;
    };
    const double err = max_grad_rel_error(model, grads, loss_fn);
    CHECK(err <= 1e-4);
    return;
  }
  FAIL("no seed with a safe activation margin found");
}

TEST_CASE("backward gradients match finite differences, classification head") {
  const CMat sraw = [] {
    Rng r(29);
    return testsup::random_complex_symmetric(5, r, 0.5);
  }();

  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Rng rng(2000 + seed);
    StgcnModel model = init_stgcn(tiny_config(HeadKind::Classification), seed);
    const CMat x = rng.cnormal_mat(5, 3);
    RVec labels(3);
    labels << 1, 0, 1;

    const auto fwd = forward(model, sraw, x);
    if (activation_margin(fwd.cache) < 5e-4) continue;

    const auto loss = loss_localization(fwd.classification, labels);
    GradientSet grads = backward(model, fwd.cache, loss.grad);

    auto loss_fn = [&]() {
      const auto f = forward(model, sraw, x);
      return loss_localization(f.classification, labels).value;
    };
    const double err = max_grad_rel_error(model, grads, loss_fn);
    CHECK(err <= 1e-4);
    return;
  }
  FAIL("no seed with a safe activation margin found");
}

TEST_CASE("trivial gradient identities") {
  Rng rng(31);
  const CMat s = testsup::random_complex_symmetric(5, rng);

  SUBCASE("zero input window zeroes the temporal kernel gradient") {
    StgcnModel model = init_stgcn(tiny_config(HeadKind::Regression), 4);
    const CMat x = CMat::Zero(5, 3);
    const auto fwd = forward(model, s, x);
    const auto loss = loss_forecast(fwd.regression, CVec::Ones(5), CVec(),
                                    CVec(), s, {}, 0.0);
    const GradientSet grads = backward(model, fwd.cache, loss.grad);
    CHECK(grads.temporal_kernel.norm() == 0.0);
  }
  SUBCASE("loss at its minimum has zero gradient everywhere") {
    StgcnModel model = init_stgcn(tiny_config(HeadKind::Regression), 5);
    const CMat x = rng.cnormal_mat(5, 3);
    const auto fwd = forward(model, s, x);
    const auto loss = loss_forecast(fwd.regression, fwd.regression, CVec(),
                                    CVec(), s, {}, 0.0);
    GradientSet grads = backward(model, fwd.cache, loss.grad);
    ParamView gv = view_grads(grads);
    for (auto [p, n] : gv.complex_blocks)
      for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(p[i]) == 0.0);
  }
  SUBCASE("stale cache is rejected") {
    StgcnModel model = init_stgcn(tiny_config(HeadKind::Regression), 6);
    const auto fwd = forward(model, s, rng.cnormal_mat(5, 3));
    StgcnModel other = init_stgcn(tiny_config(HeadKind::Classification), 6);
    const RVec gy = RVec::Zero(3);
    CHECK_THROWS_AS(backward(other, fwd.cache, gy), InvalidArgument);
  }
}

TEST_CASE("training") {
  Rng rng(37);
  CMat s = testsup::random_complex_symmetric(4, rng);
  s /= testsup::two_norm(s);

  StgcnConfig cfg;
  cfg.nodes = 4;
  cfg.window = 3;
  cfg.spatial_order = 1;
  cfg.temporal_channels = 3;
  cfg.graph_channels = 3;
  cfg.hidden_widths = {8};
  cfg.head = HeadKind::Regression;
  cfg.output_dim = 4;

  TrainSample sample;
  sample.input = rng.cnormal_mat(4, 3);
  sample.target = 0.4 * rng.cnormal_vec(4);

  TrainOptions opt;
  opt.mu2 = 0.0;
  opt.epochs = 1;
  opt.batch = 1;
  opt.seed = 7;

  SUBCASE("learning rate zero leaves parameters unchanged") {
    const StgcnModel init = init_stgcn(cfg, 9);
    opt.lr = 0.0;
    opt.epochs = 3;
    const auto result = train(init, s, {sample}, {}, opt);
    CHECK((result.model.temporal_kernel - init.temporal_kernel).norm() == 0.0);
    CHECK((result.model.head_w - init.head_w).norm() == 0.0);
  }
  SUBCASE("single sample overfits by at least 100x in 500 steps") {
    const StgcnModel init = init_stgcn(cfg, 9);
    opt.lr = 1e-2;
    opt.epochs = 500;
    const auto result = train(init, s, {sample}, {}, opt);
    CHECK(result.train_loss.front() >= 100.0 * result.train_loss.back());
  }
  SUBCASE("fixed seed reproduces the loss trace bitwise") {
    const StgcnModel init = init_stgcn(cfg, 9);
    opt.lr = 3e-3;
    opt.epochs = 20;
    const auto a = train(init, s, {sample, sample}, {sample}, opt);
    const auto b = train(init, s, {sample, sample}, {sample}, opt);
    REQUIRE(a.train_loss.size() == b.train_loss.size());
    for (size_t i = 0; i < a.train_loss.size(); ++i) {
      CHECK(a.train_loss[i] == b.train_loss[i]);
      CHECK(a.val_loss[i] == b.val_loss[i]);
    }
  }
}
