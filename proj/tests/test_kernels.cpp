#include <catch2/catch_amalgamated.hpp>

#include "msm/kernels.hpp"
#include "test_support.hpp"

using namespace msm;
using Catch::Approx;

TEST_CASE("kernel_cdf reference points") {
  REQUIRE(kernel_cdf(KernelFamily::normal, 0.0) == Approx(0.5).margin(1e-15));
  REQUIRE(kernel_cdf(KernelFamily::logistic, 0.0) == Approx(0.5).margin(1e-15));
  // r = 1 is the Cauchy law: F(1) = 1/2 + atan(1)/pi = 3/4
  REQUIRE(kernel_cdf(KernelFamily::student, 1.0, 1.0) == Approx(0.75).margin(1e-12));
  REQUIRE_THROWS_AS(kernel_cdf(KernelFamily::student, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(kernel_cdf(KernelFamily::student, 1.0, -2.0), std::invalid_argument);
}

TEST_CASE("kernel_pdf reference points") {
  REQUIRE(kernel_pdf(KernelFamily::normal, 0.0) == Approx(0.3989422804).margin(1e-9));
  REQUIRE(kernel_pdf(KernelFamily::logistic, 0.0) == Approx(0.25).margin(1e-15));
  REQUIRE(kernel_pdf(KernelFamily::student, 0.0, 1.0) == Approx(1.0 / M_PI).margin(1e-12));
}

TEST_CASE("kernel cdf limits and monotonicity") {
  for (KernelFamily fam :
       {KernelFamily::normal, KernelFamily::student, KernelFamily::logistic}) {
    const std::optional<double> shape =
        fam == KernelFamily::student ? std::optional<double>(3.0) : std::nullopt;
    REQUIRE(kernel_cdf(fam, -1e9, shape) <= 1e-12);
    REQUIRE(kernel_cdf(fam, 1e9, shape) >= 1.0 - 1e-12);
    double prev = -1.0;
    for (double z = -8.0; z <= 8.0; z += 0.05) {
      const double f = kernel_cdf(fam, z, shape);
      REQUIRE(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("student kernel approaches the normal kernel as r grows") {
  double worst = 0.0;
  for (double z = -6.0; z <= 6.0; z += 0.01) {
    const double d =
        std::abs(kernel_cdf(KernelFamily::student, z, 1e6) - kernel_cdf(KernelFamily::normal, z));
    worst = std::max(worst, d);
  }
  REQUIRE(worst <= 1e-4);
}

TEST_CASE("kernel pdf equals the central difference of the cdf") {
  const double h = 1e-5;
  for (KernelFamily fam :
       {KernelFamily::normal, KernelFamily::student, KernelFamily::logistic}) {
    const std::optional<double> shape =
        fam == KernelFamily::student ? std::optional<double>(2.5) : std::nullopt;
    for (double z = -6.0; z <= 6.0; z += 0.25) {
      const double fd =
          (kernel_cdf(fam, z + h, shape) - kernel_cdf(fam, z - h, shape)) / (2.0 * h);
      REQUIRE(kernel_pdf(fam, z, shape) == Approx(fd).margin(1e-6));
    }
  }
}

TEST_CASE("mixture_cdf examples") {
  MixtureModel one;
  one.components = {{1.0, 0.0, 1.0, {}}};
  REQUIRE(mixture_cdf(one, 0.0) == Approx(0.5).margin(1e-15));

  MixtureModel sym;
  sym.components = {{0.5, -1.0, 1.0, {}}, {0.5, 1.0, 1.0, {}}};
  REQUIRE(mixture_cdf(sym, 0.0) == Approx(0.5).margin(1e-14));

  MixtureModel mix;
  mix.components = {{0.3, 0.0, 1.0, {}}, {0.7, 2.0, 1.0, {}}};
  const double expected = 0.3 * testsupport::oracle_normal_cdf(1.0) +
                          0.7 * testsupport::oracle_normal_cdf(-1.0);
  REQUIRE(mixture_cdf(mix, 1.0) == Approx(expected).margin(1e-9));
}

TEST_CASE("mixture_pdf examples") {
  MixtureModel one;
  one.components = {{1.0, 0.0, 1.0, {}}};
  REQUIRE(mixture_pdf(one, 0.0) == Approx(0.3989422804).margin(1e-9));

  MixtureModel withdead;
  withdead.components = {{1.0, 0.0, 1.0, {}}, {0.0, 50.0, 0.001, {}}};
  REQUIRE(mixture_pdf(withdead, 50.0) == Approx(mixture_pdf(one, 50.0)).margin(1e-300));

  MixtureModel two;
  two.components = {{0.4, -1.0, 0.7, {}}, {0.6, 1.5, 2.0, {}}};
  const double h = 1e-5;
  for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    const double fd = (mixture_cdf(two, x + h) - mixture_cdf(two, x - h)) / (2.0 * h);
    REQUIRE(mixture_pdf(two, x) == Approx(fd).margin(1e-6));
  }
}

TEST_CASE("mixture_quantile examples") {
  MixtureModel one;
  one.components = {{1.0, 0.0, 1.0, {}}};
  REQUIRE(mixture_quantile(one, 0.5) == Approx(0.0).margin(1e-9));

  MixtureModel shifted;
  shifted.components = {{1.0, 3.0, 2.0, {}}};
  REQUIRE(mixture_quantile(shifted, 0.5) == Approx(3.0).margin(1e-9));

  MixtureModel two;
  two.components = {{0.35, -2.0, 0.8, {}}, {0.65, 1.0, 1.5, {}}};
  const double q = mixture_quantile(two, 0.9);
  REQUIRE(q == Approx(testsupport::oracle_grid_quantile(two, 0.9)).margin(1e-8));
  REQUIRE(mixture_cdf(two, q) == Approx(0.9).margin(1e-10));

  REQUIRE_THROWS_AS(mixture_quantile(two, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(mixture_quantile(two, 1.0), std::invalid_argument);
}

TEST_CASE("student mixture quantile straddles heavy tails") {
  MixtureModel t;
  t.family = KernelFamily::student;
  t.components = {{1.0, 0.0, 1.0, 1.0}};
  const double q99 = mixture_quantile(t, 0.99);
  // Cauchy: F^{-1}(0.99) = tan(pi * 0.49)
  REQUIRE(q99 == Approx(std::tan(M_PI * 0.49)).epsilon(1e-6));
}

TEST_CASE("mixture_moments") {
  MixtureModel one;
  one.components = {{1.0, 2.0, 3.0, {}}};
  const MixtureMoments m1 = mixture_moments(one);
  REQUIRE(m1.mean == Approx(2.0));
  REQUIRE(m1.variance == Approx(9.0));

  MixtureModel twopoint;
  twopoint.components = {{0.5, -1.0, 1e-9, {}}, {0.5, 1.0, 1e-9, {}}};
  const MixtureMoments m2 = mixture_moments(twopoint);
  REQUIRE(m2.mean == Approx(0.0).margin(1e-12));
  REQUIRE(m2.variance == Approx(1.0).margin(1e-9));
}

TEST_CASE("mixture_moments matches a sampling oracle") {
  MixtureModel m;
  m.components = {{0.25, -3.0, 0.5, {}}, {0.5, 0.5, 1.5, {}}, {0.25, 4.0, 2.5, {}}};
  testsupport::Rng rng(77);
  const auto sample = testsupport::sample_mixture(rng, m, 1000000);
  const MixtureMoments mom = mixture_moments(m);
  const double se_mean = std::sqrt(mom.variance / 1e6);
  REQUIRE(testsupport::mean_of(sample) == Approx(mom.mean).margin(3.0 * se_mean));
  // variance of the sample variance ~ (mu4 - var^2)/n; bound it loosely by 3 rel pct
  REQUIRE(testsupport::variance_of(sample) == Approx(mom.variance).epsilon(0.03));
}

TEST_CASE("mixture_moments family rules") {
  MixtureModel logi;
  logi.family = KernelFamily::logistic;
  logi.components = {{1.0, 0.0, 2.0, {}}};
  REQUIRE(mixture_moments(logi).variance == Approx(M_PI * M_PI * 4.0 / 3.0).margin(1e-12));

  MixtureModel heavy;
  heavy.family = KernelFamily::student;
  heavy.components = {{1.0, 0.0, 1.0, 1.5}};
  REQUIRE_THROWS_AS(mixture_moments(heavy), std::domain_error);

  MixtureModel ok;
  ok.family = KernelFamily::student;
  ok.components = {{1.0, 1.0, 2.0, 5.0}};
  REQUIRE(mixture_moments(ok).variance == Approx(4.0 * 5.0 / 3.0).margin(1e-12));
}

TEST_CASE("model validation") {
  MixtureModel bad;
  REQUIRE_THROWS_AS(validate_model(bad), std::invalid_argument);
  bad.components = {{0.5, 0.0, 1.0, {}}, {0.4, 1.0, 1.0, {}}};
  REQUIRE_THROWS_AS(validate_model(bad), std::invalid_argument);  // weights sum to 0.9
  bad.components = {{0.5, 0.0, 1.0, {}}, {0.5, 1.0, -1.0, {}}};
  REQUIRE_THROWS_AS(validate_model(bad), std::invalid_argument);  // negative scale
  MixtureModel good;
  good.family = KernelFamily::student;
  good.components = {{1.0, 0.0, 1.0, 4.0}};
  REQUIRE_NOTHROW(validate_model(good));
  good.components[0].shape.reset();
  REQUIRE_THROWS_AS(validate_model(good), std::invalid_argument);
}

TEST_CASE("record round-trip") {
  MixtureModel m;
  m.family = KernelFamily::student;
  m.components = {{0.25, -1.5, 0.75, 3.5}, {0.75, 2.0, 1.25, 10.0}};
  const MixtureModel back = model_from_record(to_record(m));
  REQUIRE(back.family == m.family);
  REQUIRE(back.components.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    REQUIRE(back.components[k].weight == m.components[k].weight);
    REQUIRE(back.components[k].location == m.components[k].location);
    REQUIRE(back.components[k].scale == m.components[k].scale);
    REQUIRE(back.components[k].shape.value() == m.components[k].shape.value());
  }
  REQUIRE_THROWS_AS(model_from_record("normal,2,0.5,0,1"), std::invalid_argument);
}

TEST_CASE("mixture cdf stays inside [0,1] across random models") {
  testsupport::Rng rng(2718);
  for (int t = 0; t < 50; ++t) {
    MixtureModel m;
    double wsum = 0.0;
    const int K = 1 + static_cast<int>(rng.uniform() * 4);
    std::vector<double> ws(K);
    for (auto& w : ws) {
      w = 0.1 + rng.uniform();
      wsum += w;
    }
    for (int k = 0; k < K; ++k)
      m.components.push_back(
          {ws[k] / wsum, rng.uniform(-5, 5), std::exp(rng.uniform(-2, 2)), {}});
    double prev = 0.0;
    for (double x = -30.0; x <= 30.0; x += 0.5) {
      const double f = mixture_cdf(m, x);
      REQUIRE(f >= -1e-12);
      REQUIRE(f <= 1.0 + 1e-12);
      REQUIRE(f >= prev - 1e-12);
      prev = f;
    }
  }
}
