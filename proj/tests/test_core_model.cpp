#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace wardrop;

namespace {

CongestionModel cart(double p, double delta = 1.0) { return CongestionModel::uniform(DirectionSystem::cartesian(), p, delta); }
CongestionModel hexa(double p, double delta = 1.0) { return CongestionModel::uniform(DirectionSystem::hexagonal(), p, delta); }

}  // namespace

TEST(DirectionSystem, UnitVectorsAndSpan) {
  for (const auto& d : {DirectionSystem::cartesian(), DirectionSystem::hexagonal()}) {
    for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(norm(d[k]), 1.0, 1e-12);
    EXPECT_TRUE(d.positively_spans());
    // probe directions decompose with nonnegative weights on two adjacent v_k
    for (int i = 0; i < 64; ++i) {
      const double t = 2 * std::acos(-1.0) * i / 64;
      const Vec2 w{std::cos(t), std::sin(t)};
      bool found = false;
      for (std::size_t a = 0; a < d.size() && !found; ++a)
        for (std::size_t b = 0; b < d.size() && !found; ++b) {
          const double det = cross(d[a], d[b]);
          if (std::abs(det) < 1e-12) continue;
          const double la = cross(w, d[b]) / det, lb = cross(d[a], w) / det;
          found = la >= -1e-12 && lb >= -1e-12;
        }
      EXPECT_TRUE(found) << "probe " << i;
    }
  }
  EXPECT_EQ(DirectionSystem::cartesian().size(), 4u);
  EXPECT_EQ(DirectionSystem::hexagonal().size(), 6u);
  const auto h = DirectionSystem::hexagonal();
  for (std::size_t k = 0; k < 6; ++k) {
    const double t = (k + 1) * std::acos(-1.0) / 3;
    EXPECT_NEAR(h[k].x, std::cos(t), 1e-15);
    EXPECT_NEAR(h[k].y, std::sin(t), 1e-15);
  }
  EXPECT_THROW(DirectionSystem::custom({{1, 0}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(DirectionSystem::custom({{2, 0}, {0, 1}, {-1, 0}, {0, -1}}), std::invalid_argument);
}

TEST(CongestionModel, ExponentsAndCoefficients) {
  for (double p : {1.01, 1.5, 2.0, 3.0, 100.0}) {
    const auto m = cart(p);
    EXPECT_NEAR(1 / m.p() + 1 / m.q(), 1.0, 1e-12);
  }
  EXPECT_NEAR(weight("g1")({0.5, 0.5}), 1.0, 1e-15);
  EXPECT_NEAR(weight("g1")({0.0, 0.0}), 3 - 2 * std::exp(-5.0), 1e-15);
}

TEST(CongestionModel, BMatchesFormula) {
  const Expression g1 = weight("g1");
  const CongestionModel m(DirectionSystem::cartesian(), 3.0, {1, 1, 1, 1}, {2.0, 1.0, 1.0, 0.5}, {g1, g1, 1.0, 2.0});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const Vec2 x{u(rng), u(rng)};
    for (std::size_t k = 0; k < 4; ++k) {
      const double a = m.a_expr(k)(x), c = m.c_expr(k)(x);
      // b = (a c)^{-1/(q-1)}, q = 3/2
      EXPECT_NEAR(m.b(k, x), std::pow(a * c, -1.0 / (1.5 - 1.0)), 1e-12 * m.b(k, x));
    }
  }
  EXPECT_THROW(CongestionModel::uniform(DirectionSystem::cartesian(), 1.0), std::invalid_argument);
  EXPECT_THROW(CongestionModel::uniform(DirectionSystem::cartesian(), 2.0, -1.0), std::invalid_argument);
  EXPECT_THROW(CongestionModel::uniform(DirectionSystem::cartesian(), 2.0, 1.0, 0.0), std::invalid_argument);
}

TEST(CongestionModel, ArcCongestion) {
  const auto m = cart(2.0);
  EXPECT_DOUBLE_EQ(m.arc_congestion(0, {}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(cart(2.0, 0.0).arc_congestion(0, {}, 3.0), 3.0);
  // a=2, delta=1, q=3 (p=3/2): derivative of the primitive by central differences
  const CongestionModel m3(DirectionSystem::cartesian(), 1.5, {1, 1, 1, 1}, {2.0, 2.0, 2.0, 2.0}, {1, 1, 1, 1});
  ASSERT_NEAR(m3.q(), 3.0, 1e-14);
  const double h = 1e-5;
  const double fd = (m3.primitive_G(0, {}, 2 + h) - m3.primitive_G(0, {}, 2 - h)) / (2 * h);
  EXPECT_NEAR(fd, 9.0, 1e-7);
  EXPECT_NEAR(m3.arc_congestion(0, {}, 2.0), 9.0, 1e-12);
  EXPECT_THROW(m.arc_congestion(0, {}, -1.0), std::domain_error);
  double prev = -1;
  for (double mm = 0; mm < 5; mm += 0.25) {
    EXPECT_GT(m.arc_congestion(1, {}, mm), prev);
    prev = m.arc_congestion(1, {}, mm);
  }
}

TEST(CongestionModel, PrimitiveAgainstQuadrature) {
  const auto m = cart(2.0);
  EXPECT_EQ(m.primitive_G(0, {}, 0.0), 0.0);
  const double ref = oracle::simpson([&](double t) { return m.arc_congestion(0, {}, t); }, 0, 2);
  EXPECT_NEAR(ref, 4.0, 1e-10);
  EXPECT_NEAR(m.primitive_G(0, {}, 2.0), ref, 1e-10);
  const CongestionModel m2(DirectionSystem::cartesian(), 1.5, {0, 0, 0, 0}, {2.0, 2.0, 2.0, 2.0}, {1, 1, 1, 1});
  const double ref2 = oracle::simpson([&](double t) { return m2.arc_congestion(0, {}, t); }, 0, 1);
  EXPECT_NEAR(ref2, 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(m2.primitive_G(0, {}, 1.0), ref2, 1e-10);
  EXPECT_THROW(m.primitive_G(0, {}, -0.1), std::domain_error);
}

TEST(CongestionModel, DualDensityExamples) {
  const Vec2 x{0.5, 0.5};
  EXPECT_EQ(cart(2).dual_density(x, {0.5, 0.5}), 0.0);
  const double c = oracle::dual_density(oracle::coeffs(cart(2), x), {2, 0});
  EXPECT_NEAR(c, 0.5, 1e-9);
  EXPECT_NEAR(cart(2).dual_density(x, {2, 0}), c, 1e-9);
  const double h = oracle::dual_density(oracle::coeffs(hexa(3), x), {3, 0});
  EXPECT_NEAR(h, 2.75, 1e-8);
  EXPECT_NEAR(hexa(3).dual_density(x, {3, 0}), h, 1e-8);
}

TEST(CongestionModel, DualDensityMatchesLegendreOracle) {
  std::mt19937_64 rng(11);
  const Expression g1 = weight("g1");
  for (const auto& m : {cart(1.5), hexa(2.5),
                        CongestionModel(DirectionSystem::cartesian(), 3.0, {1, 0.5, 2, 0}, {1, 2, g1, 1}, {g1, 1, 1, 3})}) {
    for (int i = 0; i < 40; ++i) {
      const Vec2 x = oracle::random_in_disc(rng, 0.5) + Vec2{0.5, 0.5};
      const Vec2 z = oracle::random_in_disc(rng, 4.0);
      const double ref = oracle::dual_density(oracle::coeffs(m, x), z);
      EXPECT_NEAR(m.dual_density(x, z), ref, 1e-8 * std::max(1.0, ref));
    }
  }
}

TEST(CongestionModel, DualGradientExamples) {
  const Vec2 x{0.5, 0.5};
  EXPECT_EQ(cart(2).dual_gradient(x, {0, 0}), (Vec2{0, 0}));
  auto fdc = oracle::fd_gradient([&](const Vec2& z) { return cart(2).dual_density(x, z); }, {2, 0}, 1e-5);
  EXPECT_NEAR(fdc.x, 1.0, 1e-8);
  EXPECT_NEAR(cart(2).dual_gradient(x, {2, 0}).x, 1.0, 1e-14);
  EXPECT_NEAR(cart(2).dual_gradient(x, {2, 0}).y, 0.0, 1e-14);
  auto fdh = oracle::fd_gradient([&](const Vec2& z) { return hexa(3).dual_density(x, z); }, {3, 0}, 1e-5);
  EXPECT_NEAR(fdh.x, 4.25, 1e-7);
  EXPECT_NEAR(fdh.y, 0.0, 1e-7);
  const Vec2 g = hexa(3).dual_gradient(x, {3, 0});
  EXPECT_NEAR(g.x, 4.25, 1e-12);
  EXPECT_NEAR(g.y, 0.0, 1e-12);
}

TEST(CongestionModel, PrimalDensityExamples) {
  const Vec2 x{0.5, 0.5};
  EXPECT_EQ(cart(2).primal_density(x, {0, 0}), 0.0);
  const double ref = oracle::primal_density(oracle::coeffs(cart(2), x), {1, 0});
  EXPECT_NEAR(ref, 1.5, 1e-8);
  EXPECT_NEAR(cart(2).primal_density(x, {1, 0}), ref, 1e-8);
  // hexagonal, q = 1.5 (p = 3)
  const double refh = oracle::primal_density(oracle::coeffs(hexa(3), x), {1, 0});
  EXPECT_NEAR(hexa(3).primal_density(x, {1, 0}), refh, 1e-7);
}

TEST(CongestionModel, PrimalDensityMatchesDecompositionOracle) {
  std::mt19937_64 rng(5);
  for (const auto& m : {hexa(2), hexa(3), hexa(10), cart(1.01), cart(4)}) {
    for (int i = 0; i < 8; ++i) {
      const Vec2 s = oracle::random_in_disc(rng, m.p() < 1.1 ? 1.2 : 2.0);
      const double ref = oracle::primal_density(oracle::coeffs(m, {0.5, 0.5}), s);
      EXPECT_NEAR(m.primal_density({0.5, 0.5}, s), ref, 2e-7 * std::max(1.0, ref)) << "p=" << m.p();
    }
  }
}

TEST(CongestionModel, FenchelYoungAndGradients) {
  for (double p : {1.01, 2.0, 3.0, 10.0, 100.0}) {
    for (const auto& m : {cart(p), p >= 2 ? hexa(p) : cart(p)}) {
      const auto [fy, gr] = oracle::convex_analysis(m, 200, 17);
      EXPECT_TRUE(fy.ok()) << "p=" << p << " worst " << fy.worst;
      EXPECT_TRUE(gr.ok()) << "p=" << p << " worst " << gr.worst;
    }
  }
  // hexagonal with p < 2 still has a valid conjugate pair
  const auto [fy, gr] = oracle::convex_analysis(hexa(1.5), 200, 19);
  EXPECT_TRUE(fy.ok()) << fy.worst;
  EXPECT_TRUE(gr.ok()) << gr.worst;
}

TEST(CongestionModel, GradientConsistencyLargeArguments) {
  std::mt19937_64 rng(23);
  for (double p : {2.0, 3.0, 10.0}) {
    const auto pm = hexa(p).at({0.5, 0.5});
    for (int i = 0; i < 100; ++i) {
      const Vec2 z = oracle::random_in_disc(rng, 10.0);
      double h = 1e-6 * std::max(1.0, norm(z));
      double kink = 1e300;
      for (std::size_t k = 0; k < 6; ++k) kink = std::min(kink, std::abs(dot(z, pm.v[k]) - pm.theta[k]));
      if (kink < 4 * h) h = kink / 4;
      if (h < 1e-10) continue;
      const Vec2 fd = oracle::fd_gradient([&](const Vec2& w) { return pm.dual_density(w); }, z, h);
      const Vec2 g = pm.dual_gradient(z);
      EXPECT_LE(norm(fd - g), 1e-5 * std::max(1.0, norm(g)));
    }
  }
}

TEST(CongestionModel, DegeneracyPolytope) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const auto& m : {cart(2), hexa(3), cart(1.01)}) {
    const auto pm = m.at({0.2, 0.7});
    int n = 0;
    while (n < 1000) {
      const Vec2 z{u(rng), u(rng)};
      bool inside = true;
      for (std::size_t k = 0; k < pm.v.size(); ++k) inside = inside && dot(z, pm.v[k]) <= pm.theta[k];
      if (!inside) continue;
      ++n;
      EXPECT_EQ(pm.dual_density(z), 0.0);
      EXPECT_EQ(pm.dual_gradient(z), (Vec2{0, 0}));
    }
  }
}

TEST(CongestionModel, CartesianSeparability) {
  std::mt19937_64 rng(31);
  for (double p : {1.01, 2.0, 3.5}) {
    const CongestionModel m(DirectionSystem::cartesian(), p, {0.7, 1.2, 0.7, 1.2}, {1.5, 0.5, 1.5, 0.5}, {1, 2, 1, 2});
    for (int i = 0; i < 200; ++i) {
      const Vec2 z = oracle::random_in_disc(rng, 5.0);
      const Vec2 x{0.5, 0.5};
      double s = 0.0;
      for (std::size_t i2 : {0u, 1u}) {
        const double b = m.b(i2, x), th = m.threshold(i2, x);
        const double zi = i2 == 0 ? z.x : z.y;
        s += b / p * std::pow(std::max(0.0, std::abs(zi) - th), p);
      }
      EXPECT_NEAR(m.dual_density(x, z), s, 1e-12 * std::max(1.0, s));
    }
  }
}

TEST(CongestionModel, FAndHMaps) {
  const Vec2 x{0.5, 0.5};
  const auto m2 = cart(2), m4 = cart(4);
  EXPECT_EQ(m2.f_map(0, x, {0.5, 0.2}), (Vec2{0, 0}));
  EXPECT_EQ(m2.h_map(0, x, {0.5, 0.2}), (Vec2{0, 0}));
  EXPECT_NEAR(m2.f_map(0, x, {3, 0}).x, 2.0, 1e-15);
  EXPECT_NEAR(m2.h_map(0, x, {3, 0}).x, 2.0, 1e-15);
  const Vec2 f = m4.f_map(0, x, {2, 0}), h = m4.h_map(0, x, {2, 0});
  EXPECT_NEAR(f.x, 1.0, 1e-15);
  EXPECT_NEAR(h.x, 1.0, 1e-15);
  EXPECT_NEAR(norm(f), std::pow(norm(h), 2 * 3.0 / 4.0), 1e-15);
  // |F| = |H|^{2(p-1)/p} on random points
  std::mt19937_64 rng(37);
  for (int i = 0; i < 100; ++i) {
    const Vec2 z = oracle::random_in_disc(rng, 4);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(norm(m4.f_map(k, x, z)), std::pow(norm(m4.h_map(k, x, z)), 1.5), 1e-12);
    }
  }
  EXPECT_THROW(cart(1.5).f_map(0, x, {1, 1}), std::domain_error);
  EXPECT_THROW(cart(1.5).h_map(0, x, {1, 1}), std::domain_error);
}

TEST(CongestionModel, LemmaInequalities) {
  for (double p : {2.0, 3.0, 4.0}) {
    for (const auto& m : {cart(p), hexa(p)}) {
      const auto r = oracle::lemma_inequalities(m, 2000, 41);
      EXPECT_TRUE(r.ok()) << "p=" << p << " worst " << r.worst;
    }
  }
}
