#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "metdet/error.hpp"
#include "metdet/model.hpp"
#include "oracles.hpp"

using namespace metdet;
using namespace metdet::testing;

TEST_CASE("cosine similarity reference values") {
  std::vector<double> v = {0.3, -1.7, 2.2};
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> ex = {1, 0}, ey = {0, 1};
  CHECK(cosine_similarity(ex, ey) == 0.0);

  // 32 / (sqrt(14) * sqrt(77)), recomputed in extended precision.
  std::vector<double> u = {1, 2, 3}, w = {4, 5, 6};
  const double expected = static_cast<double>(
      32.0L / (sqrtl(14.0L) * sqrtl(77.0L)));
  CHECK(cosine_similarity(u, w) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(cosine_similarity(u, w) == doctest::Approx(0.974631846).epsilon(1e-9));

  std::vector<double> zero = {0, 0, 0};
  CHECK(cosine_similarity(zero, u) == 0.0);
  CHECK(cosine_similarity(u, zero) == 0.0);
  CHECK(cosine_similarity(zero, zero) == 0.0);
}

TEST_CASE("cosine similarity properties") {
  Rng rng(5);
  for (int round = 0; round < 200; ++round) {
    const int d = 1 + static_cast<int>(rng.below(6));
    std::vector<double> u(d), v(d);
    for (auto& x : u) x = rng.normal(0, 2);
    for (auto& x : v) x = rng.normal(0, 2);
    const double c = cosine_similarity(u, v);
    CHECK(std::fabs(c) <= 1.0);
    CHECK(cosine_similarity(v, u) == doctest::Approx(c).epsilon(1e-12));
    const double scale = 0.1 + rng.uniform() * 5.0;
    auto su = u;
    for (auto& x : su) x *= scale;
    CHECK(cosine_similarity(su, v) == doctest::Approx(c).epsilon(1e-9));
  }
  std::vector<double> a = {1.0};
  std::vector<double> b = {1.0, 2.0};
  CHECK_THROWS_AS(cosine_similarity(a, b), error);
}

TEST_CASE("contrast-layer input is [u ; v ; cosine] of length 2d+1") {
  Rng rng(6);
  for (int d : {1, 8, 16, 768}) {
    std::vector<double> u(static_cast<std::size_t>(d)), v(u.size());
    for (auto& x : u) x = rng.normal(0, 1);
    for (auto& x : v) x = rng.normal(0, 1);
    auto cat = concat_with_cosine(u, v);
    REQUIRE(cat.size() == static_cast<std::size_t>(2 * d + 1));
    for (int i = 0; i < d; ++i) {
      CHECK(cat[static_cast<std::size_t>(i)] == u[static_cast<std::size_t>(i)]);
      CHECK(cat[static_cast<std::size_t>(d + i)] == v[static_cast<std::size_t>(i)]);
    }
    CHECK(cat.back() == doctest::Approx(ref_cosine(u, v)).epsilon(1e-12));
  }
}

TEST_CASE("mip_forward matches an independent affine+gelu recomputation") {
  const int d = 4, h = 5;
  ContrastHead head(d, h, 0.0, 77);
  Rng rng(8);
  std::vector<double> h_c(d), h_b(d);
  for (auto& x : h_c) x = rng.normal(0, 1);
  for (auto& x : h_b) x = rng.normal(0, 1);

  auto out = head.mip_forward(h_c, h_b);
  REQUIRE(out.size() == static_cast<std::size_t>(h));

  auto tensors = tensor_map(head);
  std::vector<double> x = h_c;
  x.insert(x.end(), h_b.begin(), h_b.end());
  x.push_back(ref_cosine(h_c, h_b));
  REQUIRE(x.size() == 2 * d + 1);
  auto expected = ref_affine(tensors["mip.w"], tensors["mip.b"], x);
  for (auto& v : expected) v = ref_gelu(v);
  for (int i = 0; i < h; ++i)
    CHECK(out[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-12));

  SUBCASE("zero inputs put the zero-norm cosine convention in the last slot") {
    std::vector<double> zeros(d, 0.0);
    auto cat = concat_with_cosine(zeros, zeros);
    CHECK(cat.back() == 0.0);
  }
  SUBCASE("dimension mismatches are rejected") {
    std::vector<double> wrong(d + 1, 0.0);
    CHECK_THROWS_AS(head.mip_forward(wrong, h_b), error);
  }
}

TEST_CASE("helper layers have separate parameters and the cosine slot behaves") {
  const int d = 6, h = 6;
  ContrastHead head(d, h, 0.0, 123);
  Rng rng(9);
  std::vector<double> e_def(d), e_t(d);
  for (auto& x : e_def) x = rng.normal(0, 1);
  for (auto& x : e_t) x = rng.normal(0, 1);

  auto h1 = head.helper_forward(e_def, e_t, HelperKind::Sense);
  auto h2 = head.helper_forward(e_def, e_t, HelperKind::Basic);
  CHECK(h1 != h2);  // independently initialized parameter sets

  auto tensors = tensor_map(head);
  std::vector<double> x = e_def;
  x.insert(x.end(), e_t.begin(), e_t.end());
  x.push_back(ref_cosine(e_def, e_t));
  auto expected = ref_affine(tensors["helper1.w"], tensors["helper1.b"], x);
  for (auto& v : expected) v = ref_gelu(v);
  for (int i = 0; i < h; ++i)
    CHECK(h1[static_cast<std::size_t>(i)] ==
          doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-12));

  CHECK(concat_with_cosine(e_def, e_def).back() == doctest::Approx(1.0));
  std::vector<double> zero(d, 0.0);
  CHECK(concat_with_cosine(e_def, zero).back() == 0.0);
}

namespace {

void zero_classifier(ContrastHead& head) {
  for (auto& [name, tensor] : head.tensors())
    if (name.rfind("classifier", 0) == 0)
      for (double& x : *tensor) x = 0.0;
}

EncodedViews fixed_views(int d, std::uint64_t seed) {
  Rng rng(seed);
  return random_views(d, rng);
}

}  // namespace

TEST_CASE("classify: zero parameters give the 0.5 tie, resolved to literal") {
  const int d = 8, h = 8;
  ContrastHead head(d, h, 0.0, 3);
  zero_classifier(head);
  auto views = fixed_views(d, 21);
  auto logits = head.logits(views);
  CHECK(logits[0] == 0.0);
  CHECK(logits[1] == 0.0);
  CHECK(head.p_metaphor(views) == 0.5);
  CHECK(head.predict(views) == 0);
}

TEST_CASE("classify: bias (0, 10) yields the logistic value") {
  const int d = 4, h = 4;
  ContrastHead head(d, h, 0.0, 3);
  zero_classifier(head);
  for (auto& [name, tensor] : head.tensors())
    if (name == "classifier.b") (*tensor)[1] = 10.0;
  auto views = fixed_views(d, 22);
  // Independent route: softmax(0, 10)[1] = 1 / (1 + e^-10).
  const double expected = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(head.p_metaphor(views) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(head.p_metaphor(views) == doctest::Approx(0.99995).epsilon(1e-4));
  CHECK(head.predict(views) == 1);
}

TEST_CASE("swapping helper blocks together with classifier blocks fixes the logits") {
  const int d = 5, h = 7;
  ContrastHead head(d, h, 0.0, 31);
  Rng rng(32);
  std::vector<double> hm(h), h1(h), h2(h);
  for (auto& x : hm) x = rng.normal(0, 1);
  for (auto& x : h1) x = rng.normal(0, 1);
  for (auto& x : h2) x = rng.normal(0, 1);

  auto before = head.classify(hm, h1, h2);

  // Swap the classifier weight columns for the h1 and h2 blocks.
  for (auto& [name, tensor] : head.tensors()) {
    if (name != "classifier.w") continue;
    auto& w = *tensor;
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < h; ++i)
        std::swap(w[static_cast<std::size_t>(o * 3 * h + h + i)],
                  w[static_cast<std::size_t>(o * 3 * h + 2 * h + i)]);
  }
  auto after = head.classify(hm, h2, h1);
  CHECK(after[0] == doctest::Approx(before[0]).epsilon(1e-12));
  CHECK(after[1] == doctest::Approx(before[1]).epsilon(1e-12));
}

TEST_CASE("forward composition matches the scalar reference end to end") {
  const int d = 16, h = 16;
  ContrastHead head(d, h, 0.0, 808);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    auto views = fixed_views(d, seed);
    const double p = head.p_metaphor(views);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p == doctest::Approx(ref_p_metaphor(head, views)).epsilon(1e-12));
  }
}

TEST_CASE("identical definition views only coincide when helpers share parameters") {
  const int d = 8, h = 8;
  ContrastHead head(d, h, 0.0, 55);
  auto views = fixed_views(d, 60);
  views.h_b = views.h_c;
  views.e_tb = views.e_tc;
  auto h1 = head.helper_forward(views.e_tc, views.e_t, HelperKind::Sense);
  auto h2 = head.helper_forward(views.e_tb, views.e_t, HelperKind::Basic);
  CHECK(h1 != h2);
}

TEST_CASE("softmax probabilities sum to one") {
  Rng rng(71);
  for (int round = 0; round < 500; ++round) {
    std::array<double, 2> logits = {rng.normal(0, 50), rng.normal(0, 50)};
    auto p = softmax2(logits);
    CHECK(std::fabs(p[0] + p[1] - 1.0) <= 1e-12);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const int d = 8, h = 8;
  ContrastHead head(d, h, 0.0, 2024);
  Rng rng(17);
  std::vector<EncodedViews> views;
  std::vector<int> labels;
  for (int i = 0; i < 4; ++i) {
    views.push_back(random_views(d, rng));
    labels.push_back(static_cast<int>(rng.below(2)));
  }
  const double err = grad_check_max_rel_err(head, views, labels, 3.0);
  CHECK(err < 1e-3);
}

TEST_CASE("evaluation-mode forward is a pure function of views and parameters") {
  const int d = 8, h = 8;
  ContrastHead head(d, h, 0.2, 99);  // dropout configured but disabled at eval
  auto views = fixed_views(d, 70);
  const double p1 = head.p_metaphor(views);
  const double p2 = head.p_metaphor(views);
  CHECK(p1 == p2);

  HeadGradients g1 = head.zero_gradients(), g2 = head.zero_gradients();
  const double l1 = head.loss_and_accumulate(views, 1, 3.0, g1, nullptr);
  const double l2 = head.loss_and_accumulate(views, 1, 3.0, g2, nullptr);
  CHECK(l1 == l2);
  CHECK(g1.mip_w == g2.mip_w);
}

TEST_CASE("dropout only affects training-mode passes") {
  const int d = 8, h = 8;
  ContrastHead head(d, h, 0.5, 99);
  auto views = fixed_views(d, 70);
  Rng dropout_rng(1);
  HeadGradients g = head.zero_gradients();
  const double train_loss_a = head.loss_and_accumulate(views, 1, 3.0, g, &dropout_rng);
  const double train_loss_b = head.loss_and_accumulate(views, 1, 3.0, g, &dropout_rng);
  const double eval_loss = head.loss_and_accumulate(views, 1, 3.0, g, nullptr);
  // Two train-mode passes draw different masks; eval mode is deterministic.
  CHECK(train_loss_a != train_loss_b);
  CHECK(eval_loss == head.loss_and_accumulate(views, 1, 3.0, g, nullptr));
}

TEST_CASE("checkpoints round-trip and reject foreign versions") {
  TempDir tmp;
  AugmentedInstance aug;
  aug.base = make_instance("s", {"the", "plant", "grows"}, 1, PosTag::Noun, 0);
  aug.sense_definition = "a living organism";
  aug.basic_definition = "an organism that is not an animal";
  auto vocab = Vocab::build_from({aug});

  Checkpoint ckpt;
  ckpt.config = {{"class_weight", "4"}, {"seeds", "1,2"}};
  ckpt.vocab = vocab;
  ckpt.dim = 8;
  ckpt.hidden = 8;
  ckpt.max_len = 64;
  ckpt.dropout = 0.2;
  ckpt.shared_definition_encoders = false;
  ckpt.sentence_encoder = std::make_shared<ToyEncoder>(vocab.size(), 8, 64, 5);
  ckpt.sense_encoder = std::make_shared<ToyEncoder>(vocab.size(), 8, 64, 6);
  ckpt.basic_encoder = std::make_shared<ToyEncoder>(vocab.size(), 8, 64, 7);
  ckpt.head = ContrastHead(8, 8, 0.2, 8);

  save_checkpoint(ckpt, tmp.file("model.ckpt"));
  auto loaded = load_checkpoint(tmp.file("model.ckpt"));

  CHECK(loaded.dim == 8);
  CHECK(loaded.config_value("class_weight") == "4");
  CHECK(loaded.vocab.tokens() == vocab.tokens());
  CHECK(loaded.shared_definition_encoders == false);

  auto orig_tensors = std::as_const(ckpt.head).tensors();
  auto loaded_tensors = std::as_const(loaded.head).tensors();
  REQUIRE(orig_tensors.size() == loaded_tensors.size());
  for (std::size_t i = 0; i < orig_tensors.size(); ++i)
    CHECK(*orig_tensors[i].second == *loaded_tensors[i].second);

  // The loaded pipeline predicts identically.
  const auto views = encode_views(aug, ckpt.stack(), ckpt.vocab, ckpt.max_len);
  const auto loaded_views = encode_views(aug, loaded.stack(), loaded.vocab, loaded.max_len);
  CHECK(ckpt.head.p_metaphor(views) == loaded.head.p_metaphor(loaded_views));

  SUBCASE("version mismatch is rejected") {
    write_text(tmp.file("bad.ckpt"), "metdet-checkpoint-v999\n");
    try {
      load_checkpoint(tmp.file("bad.ckpt"));
      FAIL("expected CheckpointVersion");
    } catch (const error& e) {
      CHECK(e.code() == "CheckpointVersion");
    }
  }
  SUBCASE("shared encoders serialize once and alias on load") {
    ckpt.shared_definition_encoders = true;
    ckpt.basic_encoder = ckpt.sense_encoder;
    save_checkpoint(ckpt, tmp.file("shared.ckpt"));
    auto shared = load_checkpoint(tmp.file("shared.ckpt"));
    CHECK(shared.sense_encoder == shared.basic_encoder);
  }
}
