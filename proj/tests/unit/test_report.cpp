#include <doctest.h>

#include "isogplvm/errors.hpp"
#include "isogplvm/report.hpp"

#include <cmath>
#include <limits>

using namespace isogplvm;

TEST_CASE("config parsing") {
  const auto c = config_from_json(R"({"eps": 0.5, "inducing": 12, "seed": 9, "threads": 4})");
  CHECK(c.eps == 0.5);
  CHECK(c.inducing == 12);
  CHECK(c.seed == 9);
  CHECK(c.threads == 4);
  CHECK(c.mc_samples == ModelConfig{}.mc_samples);

  CHECK_THROWS_WITH_AS(config_from_json(R"({"inducing": 12})"), doctest::Contains("eps"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"eps": 1, "epoch": 3})"), doctest::Contains("epoch"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"eps": "x"})"), doctest::Contains("eps"), ValidationError);
  CHECK_THROWS_WITH_AS(config_from_json(R"({"eps": 1, "mc_samples": 1})"),
                       doctest::Contains("mc_samples"), ValidationError);
  CHECK_THROWS_AS(config_from_json("{not json"), ValidationError);

  // Round trip; threads never reaches the serialized form.
  ModelConfig d = c;
  d.learning_rate = 0.0123456789;
  const auto text = config_to_json(d);
  CHECK(text.find("threads") == std::string::npos);
  const auto back = config_from_json(text);
  CHECK(back.learning_rate == d.learning_rate);
  CHECK(back.inducing == d.inducing);
  CHECK(back.threads == 1);
}

TEST_CASE("field and report round trips") {
  const auto pl = gen_plane(10, 1.0, 1.0, 2);
  const auto e = euclidean_distances(pl.data);
  ModelConfig c;
  c.eps = 0.6;
  c.inducing = 4;
  c.epochs = 2;
  c.curve_segments = 4;
  c.mc_samples = 5;
  const auto rep = fit(e, c);

  const auto f = field_from_json(field_to_json(rep.field));
  CHECK(f.inducing.mean == rep.field.inducing.mean);
  CHECK(f.inducing.chol_cov == rep.field.inducing.chol_cov);
  CHECK(f.kernel.log_lengthscales == rep.field.kernel.log_lengthscales);
  CHECK(f.kernel.log_variance == rep.field.kernel.log_variance);

  const auto text = report_to_json(rep);
  const auto back = report_from_json(text);
  CHECK(back.latent.mu == rep.latent.mu);
  CHECK(back.elbo_trace == rep.elbo_trace);
  REQUIRE(back.pairs.size() == rep.pairs.size());
  CHECK(back.pairs[3].mean_length == rep.pairs[3].mean_length);
  CHECK(report_to_json(back) == text);

  CHECK_THROWS_AS(report_from_json(R"({"kind": "fit_report"})"), ValidationError);
  CHECK_THROWS_AS(field_from_json(R"({"ambient_dim": 3})"), ValidationError);
}

TEST_CASE("csv writers") {
  LatentState z{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  z.mu(1, 0) = 0.1;
  const auto emb = embedding_csv(z);
  CHECK(emb == "index,mu0,mu1,var0,var1\n0,0,0,1,1\n1,0.10000000000000001,0,1,1\n");
  CHECK(trace_csv({-1.5, -1.25}) == "epoch,elbo\n0,-1.5\n1,-1.25\n");
}

TEST_CASE("abort dump") {
  LatentState z{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  z.mu(0, 0) = std::numeric_limits<double>::quiet_NaN();
  JacobianField f;
  f.kernel.log_lengthscales = VectorXd::Zero(2);
  f.inducing.locations = MatrixXd::Zero(1, 2);
  f.inducing.mean = MatrixXd::Zero(1, 6);
  f.inducing.chol_cov = MatrixXd::Identity(1, 1);
  ModelConfig c;
  c.eps = 1.0;
  const FitAborted err("non-finite ELBO at epoch 7", 7, z, f);
  const auto text = abort_dump_json(err, c);
  CHECK(text.find("\"epoch\": 7") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);
  CHECK(text.find("non-finite ELBO") != std::string::npos);
}
