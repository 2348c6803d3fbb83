#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mrfp/metrics.hpp"
#include "mrfp/rng.hpp"
#include "oracles.hpp"

using namespace mrfp;

namespace {

LabelMap map_of(std::initializer_list<std::int32_t> values, int h, int w) {
  LabelMap m(1, h, w);
  std::copy(values.begin(), values.end(), m.v.begin());
  return m;
}

}  // namespace

TEST_CASE("accumulate counts matching pixels") {
  ConfusionMatrix cm(2);
  const LabelMap gt = map_of({0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 2, 5);
  cm.accumulate(gt, gt);
  CHECK(cm.at(0, 0) == 10);
  CHECK(cm.total() == 10);
}

TEST_CASE("ignored pixels never enter the counts") {
  ConfusionMatrix cm(2);
  LabelMap gt = map_of({255, 255, 255, 255}, 2, 2);
  const LabelMap pred = map_of({0, 1, 0, 1}, 2, 2);
  cm.accumulate(gt, pred);
  CHECK(cm.total() == 0);
}

TEST_CASE("mixed two-class hand count") {
  ConfusionMatrix cm(2);
  cm.accumulate(map_of({0, 0, 1, 1}, 1, 4), map_of({0, 1, 1, 1}, 1, 4));
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);

  const MIoUReport r = miou(cm);
  CHECK(r.per_class_iou[0] == doctest::Approx(0.5));
  CHECK(r.per_class_iou[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.mean_iou == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("label validation") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.accumulate(map_of({3}, 1, 1), map_of({0}, 1, 1)), std::out_of_range);
  CHECK_THROWS_AS(cm.accumulate(map_of({0}, 1, 1), map_of({2}, 1, 1)), std::out_of_range);
  CHECK_THROWS_AS(cm.accumulate(map_of({0}, 1, 1), map_of({0, 0}, 1, 2)),
                  std::invalid_argument);
}

TEST_CASE("perfect prediction scores one") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 5;
  cm.at(1, 1) = 2;
  cm.at(2, 2) = 9;
  const MIoUReport r = miou(cm);
  for (double v : r.per_class_iou) CHECK(v == 1.0);
  CHECK(r.mean_iou == 1.0);
}

TEST_CASE("classes absent from both sides are excluded from the mean") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4;
  cm.at(1, 1) = 4;  // class 2 never appears
  const MIoUReport r = miou(cm);
  CHECK(std::isnan(r.per_class_iou[2]));
  CHECK(r.mean_iou == doctest::Approx(1.0));
}

TEST_CASE("empty matrix is an error") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(miou(cm), std::domain_error);
}

TEST_CASE("accumulation is order independent and merge matches") {
  Rng rng(1);
  std::vector<LabelMap> gts, preds;
  for (int s = 0; s < 6; ++s) {
    LabelMap g(1, 5, 5), p(1, 5, 5);
    for (auto& v : g.v) v = rng.bernoulli(0.1) ? 255 : rng.uniform_int(0, 3);
    for (auto& v : p.v) v = static_cast<std::int32_t>(rng.uniform_int(0, 3));
    gts.push_back(g);
    preds.push_back(p);
  }
  ConfusionMatrix forward(4), reversed(4), merged(4);
  for (int s = 0; s < 6; ++s) forward.accumulate(gts[s], preds[s]);
  for (int s = 5; s >= 0; --s) reversed.accumulate(gts[s], preds[s]);
  for (int s = 0; s < 6; ++s) {
    ConfusionMatrix part(4);
    part.accumulate(gts[s], preds[s]);
    merged.merge(part);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(forward.at(i, j) == reversed.at(i, j));
      CHECK(forward.at(i, j) == merged.at(i, j));
    }
}

TEST_CASE("miou is invariant to consistent relabeling") {
  Rng rng(2);
  LabelMap g(1, 8, 8), p(1, 8, 8);
  for (auto& v : g.v) v = static_cast<std::int32_t>(rng.uniform_int(0, 2));
  for (auto& v : p.v) v = static_cast<std::int32_t>(rng.uniform_int(0, 2));
  ConfusionMatrix cm(3);
  cm.accumulate(g, p);
  const double base = miou(cm).mean_iou;

  const int perm[3] = {2, 0, 1};
  LabelMap gp = g, pp = p;
  for (auto& v : gp.v) v = perm[v];
  for (auto& v : pp.v) v = perm[v];
  ConfusionMatrix cmp(3);
  cmp.accumulate(gp, pp);
  CHECK(miou(cmp).mean_iou == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("miou matches the naive counting oracle on random instances") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = static_cast<int>(rng.uniform_int(2, 6));
    const int h = static_cast<int>(rng.uniform_int(2, 9));
    const int w = static_cast<int>(rng.uniform_int(2, 9));
    std::vector<LabelMap> gts, preds;
    ConfusionMatrix cm(k);
    for (int s = 0; s < 3; ++s) {
      LabelMap g(1, h, w), p(1, h, w);
      for (auto& v : g.v) v = rng.bernoulli(0.15) ? 255 : rng.uniform_int(0, k - 1);
      for (auto& v : p.v) v = static_cast<std::int32_t>(rng.uniform_int(0, k - 1));
      cm.accumulate(g, p);
      gts.push_back(g);
      preds.push_back(p);
    }
    if (cm.total() == 0) continue;
    const MIoUReport fast = miou(cm);
    const oracle::NaiveIoU slow = oracle::naive_miou(gts, preds, k, 255);
    CHECK(std::fabs(fast.mean_iou - slow.mean) < 1e-9);
    for (int c = 0; c < k; ++c) {
      if (std::isnan(slow.per_class[c])) CHECK(std::isnan(fast.per_class_iou[c]));
      else CHECK(std::fabs(fast.per_class_iou[c] - slow.per_class[c]) < 1e-9);
    }
  }
}

TEST_CASE("stat embedding shapes and constants") {
  const Tensor f = Tensor::full(3, 4, 5, 5, 2.5);
  const StatEmbedding e = stat_embedding(f);
  CHECK(e.rows() == 3);
  CHECK(e.cols() == 8);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 4; ++c) {
      CHECK(e(i, c) == doctest::Approx(2.5));
      CHECK(e(i, 4 + c) == doctest::Approx(std::sqrt(kStatsEps)));
    }
  }
  CHECK(e.row(0) == e.row(1));
}

TEST_CASE("mmd of identical multisets is zero") {
  const Tensor f = oracle::random_tensor(6, 3, 4, 4, 9);
  const StatEmbedding e = stat_embedding(f);
  CHECK(mmd(e, e) <= 1e-9);
}

TEST_CASE("mmd is symmetric and non-negative") {
  Rng rng(10);
  StatEmbedding a(20, 4), b(25, 4);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = rng.gaussian();
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 4; ++j) b(i, j) = rng.gaussian(0.5, 1.3);
  const double ab = mmd(a, b);
  CHECK(ab >= 0.0);
  CHECK(mmd(b, a) == doctest::Approx(ab).epsilon(1e-12));
}

TEST_CASE("separated clouds score far above the null") {
  Rng rng(11);
  StatEmbedding a(500, 2), b(500, 2), a2(500, 2);
  for (int i = 0; i < 500; ++i)
    for (int j = 0; j < 2; ++j) {
      a(i, j) = rng.gaussian();
      b(i, j) = rng.gaussian(5.0, 1.0);
      a2(i, j) = rng.gaussian();
    }
  CHECK(mmd(a, b) > 10.0 * mmd(a, a2));
}

TEST_CASE("median bandwidth makes mmd scale-equivariant") {
  Rng rng(12);
  StatEmbedding a(40, 3), b(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) {
      a(i, j) = rng.gaussian();
      b(i, j) = rng.gaussian(1.0, 2.0);
    }
  const double base = mmd(a, b);
  const double scaled = mmd(StatEmbedding(a * 37.5), StatEmbedding(b * 37.5));
  CHECK(std::fabs(base - scaled) < 1e-6);
}

TEST_CASE("mmd matches the naive double-sum oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 12));
    const int m = static_cast<int>(rng.uniform_int(2, 12));
    const int d = static_cast<int>(rng.uniform_int(1, 4));
    StatEmbedding a(n, d), b(m, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = rng.gaussian();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) b(i, j) = rng.gaussian(0.7, 1.1);
    CHECK(std::fabs(mmd(a, b) - oracle::naive_mmd(a, b)) < 1e-9);
  }
}

TEST_CASE("mmd validates its inputs") {
  StatEmbedding a(3, 2), b(3, 3), c(1, 2);
  a.setZero();
  b.setZero();
  c.setZero();
  CHECK_THROWS_AS(mmd(a, b), std::invalid_argument);
  CHECK_THROWS_AS(mmd(a, c), std::invalid_argument);
}

TEST_CASE("embedding export round-trips and is byte-stable") {
  namespace fs = std::filesystem;
  Rng rng(14);
  StatEmbedding e(2, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) e(i, j) = rng.gaussian() * std::pow(10.0, rng.uniform_int(-8, 8));

  const auto path = (fs::temp_directory_path() / "mrfp_embedding.txt").string();
  export_embedding(e, path);
  const StatEmbedding back = import_embedding(path);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) CHECK(back(i, j) == e(i, j));

  // byte stability across runs
  std::ifstream f1(path);
  std::string first((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  export_embedding(e, path);
  std::ifstream f2(path);
  std::string second((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(first == second);
  fs::remove(path);

  // empty embedding: header-only file
  const auto empty_path = (fs::temp_directory_path() / "mrfp_embedding_empty.txt").string();
  export_embedding(StatEmbedding(0, 6), empty_path);
  const StatEmbedding none = import_embedding(empty_path);
  CHECK(none.rows() == 0);
  CHECK(none.cols() == 6);
  fs::remove(empty_path);
}
