#include <doctest.h>

#include <cmath>

#include "arp/error.hpp"
#include "arp/external_scorer.hpp"
#include "arp/rng.hpp"
#include "arp/tsr.hpp"
#include "support.hpp"

using namespace arp;

#ifndef ARP_FAKE_SCORER
#define ARP_FAKE_SCORER "fake_scorer"
#endif

namespace {

LogisticParams random_params(Rng& rng, int c, int f) {
  LogisticParams p;
  p.W.resize(c, f);
  p.b.resize(c);
  for (int i = 0; i < c; ++i) {
    p.b(i) = rng.normal();
    for (int j = 0; j < f; ++j) p.W(i, j) = 0.5 * rng.normal();
  }
  return p;
}

}  // namespace

TEST_SUITE("tsr") {
  TEST_CASE("decision rule") {
    const auto& cl = all_classes();
    const std::vector<double> good{0.95, 0.01, 0.01, 0.01, 0.01, 0.01};
    auto d = decide(good, cl, SignClass::Stop);
    CHECK(d.detected);
    CHECK_FALSE(d.attack_success);
    const std::vector<double> weak{0.25, 0.15, 0.15, 0.15, 0.15, 0.15};
    d = decide(weak, cl, SignClass::Stop);
    CHECK_FALSE(d.detected);
    CHECK(d.attack_success);
    const std::vector<double> wrong{0.02, 0.9, 0.02, 0.02, 0.02, 0.02};
    d = decide(wrong, cl, SignClass::SL65);
    CHECK(d.detected);
    CHECK(d.cls == SignClass::SL25);
    CHECK(d.attack_success);
    CHECK_THROWS_AS(decide(good, cl, SignClass::Stop, 1.0), InvalidArgument);
    CHECK_THROWS_AS(decide({0.5, 0.5}, cl, SignClass::Stop), InvalidArgument);
  }

  TEST_CASE("softmax") {
    Rng rng(1);
    Eigen::MatrixXd logits(20, 6);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 6; ++j) logits(i, j) = 30 * rng.normal();
    const Eigen::MatrixXd p = softmax_rows(logits);
    for (int i = 0; i < 20; ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-6);
    // Permuting columns permutes the outputs.
    Eigen::MatrixXd perm = logits;
    perm.col(0).swap(perm.col(3));
    const Eigen::MatrixXd q = softmax_rows(perm);
    for (int i = 0; i < 20; ++i) {
      CHECK(q(i, 0) == doctest::Approx(p(i, 3)));
      CHECK(q(i, 3) == doctest::Approx(p(i, 0)));
    }
  }

  TEST_CASE("gradient matches central differences") {
    Rng rng(2);
    for (int draw = 0; draw < 4; ++draw) {
      const int n = 7, c = 4, f = 9;
      Eigen::MatrixXd X(n, f), Y = Eigen::MatrixXd::Zero(n, c);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < f; ++j) X(i, j) = rng.normal();
        Y(i, rng.index(c)) = 1.0;
      }
      LogisticParams p = random_params(rng, c, f), g;
      const double l2 = 0.01;
      softmax_loss(p, X, Y, l2, &g);
      const double h = 1e-5;
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < f; ++j) {
          LogisticParams a = p, b = p;
          a.W(i, j) += h;
          b.W(i, j) -= h;
          const double fd = (softmax_loss(a, X, Y, l2, nullptr) - softmax_loss(b, X, Y, l2, nullptr)) / (2 * h);
          CHECK(std::abs(fd - g.W(i, j)) <= 1e-4 * std::max(1e-3, std::abs(fd)));
        }
      for (int i = 0; i < c; ++i) {
        LogisticParams a = p, b = p;
        a.b(i) += h;
        b.b(i) -= h;
        const double fd = (softmax_loss(a, X, Y, l2, nullptr) - softmax_loss(b, X, Y, l2, nullptr)) / (2 * h);
        CHECK(std::abs(fd - g.b(i)) <= 1e-4 * std::max(1e-3, std::abs(fd)));
      }
    }
  }

  TEST_CASE("features") {
    std::vector<double> input(kPixelFeatures, 0.5);
    const Eigen::VectorXd f = features_from_input(input);
    CHECK(f.size() == kFeatureCount);
    for (int c = 0; c < 3; ++c) CHECK(f.segment(kPixelFeatures + c * kHistBins, kHistBins).sum() == doctest::Approx(1.0));
  }

  TEST_CASE("two-class toy problem") {
    TrainOptions o;
    o.per_class = 200;
    o.noise_images = 0;
    const auto m = train_surrogate({reference_scene()}, {SignClass::Stop, SignClass::Background}, 3, o);
    CHECK(m.final_accuracy >= 0.99);
  }

  TEST_CASE("training is deterministic") {
    TrainOptions o;
    o.per_class = 20;
    o.noise_images = 10;
    o.epochs = 30;
    const auto a = train_surrogate({reference_scene()}, all_classes(), 5, o);
    const auto b = train_surrogate({reference_scene()}, all_classes(), 5, o);
    CHECK(a.params().W == b.params().W);
    CHECK(a.params().b == b.params().b);
  }

  TEST_CASE("empty training request") {
    CHECK_THROWS_AS(train_surrogate({}, all_classes(), 1), InvalidArgument);
    TrainOptions o;
    o.per_class = 0;
    CHECK_THROWS_AS(train_surrogate({reference_scene()}, all_classes(), 1, o), InvalidArgument);
  }

  TEST_CASE("trained surrogate") {
    const auto& m = arp::testing::trained_model();
    CHECK(m.final_accuracy >= 0.95);
    const SceneRenderer r(reference_scene());
    CHECK(confidence(m, r.render_night({}), SignClass::Stop) >= 0.9);
    CHECK(confidence(m, r.render_day({}), SignClass::Stop) >= 0.9);
    for (SignClass c : {SignClass::SL25, SignClass::SL35, SignClass::SL65, SignClass::Yield}) {
      const SceneRenderer rc(reference_scene(sign_for_class(c)));
      CHECK(detect(m, rc.render_night({}), c).cls == c);
    }
    Rng rng(8);
    std::vector<double> noise(kPixelFeatures);
    for (auto& v : noise) v = rng.uniform();
    // Noise may look like background but never like a confident sign.
    const auto pn = m.predict_input(noise);
    for (std::size_t k = 0; k < pn.size(); ++k)
      if (m.classes()[k] != SignClass::Background) CHECK(pn[k] <= 0.5);
    const auto img = r.render_night({});
    CHECK(m.scores(img) == m.scores(img));
  }

  TEST_CASE("model file round trip") {
    TrainOptions o;
    o.per_class = 10;
    o.noise_images = 0;
    o.epochs = 5;
    const auto m = train_surrogate({reference_scene()}, all_classes(), 4, o);
    const auto path = arp::testing::temp_dir("model") + "/m.json";
    m.save_json(path);
    const auto back = SurrogateModel::load_json(path);
    CHECK(back.params().W == m.params().W);
    CHECK(back.feature_mean() == m.feature_mean());
    CHECK(back.classes() == m.classes());
    const auto img = render_night(reference_scene(), {});
    CHECK(back.scores(img) == m.scores(img));
    CHECK_THROWS(SurrogateModel::load_json(path + ".missing"));
  }

  TEST_CASE("external scorer protocol") {
    const auto dir = arp::testing::temp_dir("external");
    const auto img = render_night(reference_scene(), {});
    {
      ExternalScorer s({ARP_FAKE_SCORER, "ok"}, all_classes(), dir);
      const auto p = s.scores(img);
      REQUIRE(p.size() == 6);
      CHECK(p[0] == doctest::Approx(0.9));
      CHECK(detect(s, img, SignClass::Stop).detected);
      CHECK(s.scores(img) == p);
    }
    for (const char* mode : {"bad_json", "wrong_size", "out_of_range"}) {
      CAPTURE(mode);
      ExternalScorer s({ARP_FAKE_SCORER, mode}, all_classes(), dir);
      CHECK_THROWS_AS(s.scores(img), ProtocolError);
    }
    ExternalScorer gone({ARP_FAKE_SCORER, "exit"}, all_classes(), dir);
    CHECK_THROWS_AS(gone.scores(img), IoError);
  }
}
