#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "sectorcast/knn.hpp"
#include "sectorcast/rng.hpp"

using namespace sectorcast;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& features,
                     const std::vector<int>& labels) {
  Dataset data;
  for (std::size_t j = 0; j < features.front().size(); ++j)
    data.schema.push_back("f" + std::to_string(j));
  for (std::size_t i = 0; i < features.size(); ++i) {
    StockRecord rec;
    rec.stock_id = std::to_string(i);
    rec.features = features[i];
    rec.label = labels[i];
    data.records.push_back(rec);
  }
  return data;
}

/// Independent posterior oracle: full stable sort on (distance, index).
double posterior_oracle(const Dataset& reference, const std::vector<double>& x,
                        int K) {
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < static_cast<int>(reference.size()); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = reference.records[static_cast<std::size_t>(i)].features[j] - x[j];
      sq += diff * diff;
    }
    order.emplace_back(sq, i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first < b.first;
                     return a.second < b.second;
                   });
  int positive = 0;
  for (int r = 0; r < K; ++r)
    if (reference.records[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)]
            .label > 0)
      ++positive;
  return static_cast<double>(positive) / K;
}

}  // namespace

TEST_CASE("knn_posterior counts nearest labels", "[knn]") {
  // Points on a line at distances 1..6 from the origin.
  auto data = make_dataset({{1.0}, {2.0}, {3.0}, {4.0}, {5.0}, {6.0}},
                           {+1, +1, +1, -1, -1, -1});
  CHECK(knn_posterior(data, {0.0}, 5) == Catch::Approx(0.6));
  CHECK(knn_posterior(data, {6.5}, 1) == 0.0);
  SECTION("query equal to a reference point ranks it first") {
    CHECK(knn_posterior(data, {4.0}, 1) == 0.0);
    CHECK(knn_posterior(data, {1.0}, 1) == 1.0);
  }
  SECTION("K out of range") {
    CHECK_THROWS_AS(knn_posterior(data, {0.0}, 7), KTooLargeError);
    CHECK_THROWS_AS(knn_posterior(data, {0.0}, 0), KTooLargeError);
  }
}

TEST_CASE("knn_posterior matches the full-sort oracle", "[knn]") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 20);
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      // Integer coordinates produce frequent distance ties.
      features.push_back({static_cast<double>(rng() % 5),
                          static_cast<double>(rng() % 5)});
      labels.push_back(rng() % 2 == 0 ? +1 : -1);
    }
    auto data = make_dataset(features, labels);
    std::vector<double> x{static_cast<double>(rng() % 5),
                          static_cast<double>(rng() % 5)};
    const int K = 1 + static_cast<int>(rng() % n);
    CHECK(knn_posterior(data, x, K) == posterior_oracle(data, x, K));
  }
}

TEST_CASE("posterior values and scale invariance", "[knn]") {
  std::mt19937_64 rng(77);
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    features.push_back({gaussian(rng), gaussian(rng)});
    labels.push_back(rng() % 2 == 0 ? +1 : -1);
  }
  auto data = make_dataset(features, labels);
  Dataset scaled = data;
  for (auto& rec : scaled.records)
    for (auto& v : rec.features) v *= 3.5;

  for (int probe = 0; probe < 30; ++probe) {
    std::vector<double> x{gaussian(rng), gaussian(rng)};
    std::vector<double> sx{x[0] * 3.5, x[1] * 3.5};
    const int K = 1 + probe % 30;
    const double p = knn_posterior(data, x, K);
    // Posterior is a multiple of 1/K.
    CHECK(std::abs(p * K - std::round(p * K)) < 1e-12);
    CHECK(knn_posterior(scaled, sx, K) == p);
  }
}

TEST_CASE("select_k finds k*=1 on paired data", "[knn]") {
  // Tight same-label pairs, far apart from each other, with labels arranged
  // so wider neighborhoods disagree: every point's nearest neighbor is its
  // twin, while 3-neighborhoods reach into opposite-label pairs.
  std::mt19937_64 rng(13);
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  for (int pair = 0; pair < 20; ++pair) {
    const int label = pair % 2 == 0 ? +1 : -1;
    const double cx = (pair % 5) * 4.0, cy = (pair / 5) * 4.0;
    features.push_back({cx, cy});
    features.push_back({cx + 0.1, cy});
    labels.push_back(label);
    labels.push_back(label);
  }
  auto data = make_dataset(features, labels);
  auto result = select_k(data, 100, 10, 3);
  CHECK(result.k_star == 1);
  CHECK(result.cv_errors[0] <= 0.1);
}

TEST_CASE("select_k first-minimum and cap rules", "[knn]") {
  SECTION("first minimum wins ties") {
    CHECK(first_minimum({1, 2, 3, 4, 5, 6, 7},
                        {0.5, 0.4, 0.2, 0.3, 0.4, 0.3, 0.2}) == 3);
    CHECK(first_minimum({1, 2}, {0.3, 0.3}) == 1);
  }
  SECTION("grid is capped at floor(9n/10)") {
    std::mt19937_64 rng(5);
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (int i = 0; i < 15; ++i) {
      features.push_back({gaussian(rng)});
      labels.push_back(i % 2 == 0 ? +1 : -1);
    }
    auto data = make_dataset(features, labels);
    auto result = select_k(data, 100, 10, 1);
    CHECK(result.ks.back() == 13);  // floor(13.5)
    CHECK(result.k_star <= 13);
  }
  SECTION("too few records") {
    auto data = make_dataset({{0.0}, {1.0}}, {+1, -1});
    CHECK_THROWS_AS(select_k(data, 100, 10, 0), TooFewRecordsError);
  }
  SECTION("deterministic per seed") {
    std::mt19937_64 rng(6);
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
      features.push_back({gaussian(rng), gaussian(rng)});
      labels.push_back(rng() % 2 == 0 ? +1 : -1);
    }
    auto data = make_dataset(features, labels);
    auto a = select_k(data, 100, 10, 42);
    auto b = select_k(data, 100, 10, 42);
    CHECK(a.k_star == b.k_star);
    CHECK(a.cv_errors == b.cv_errors);
  }
}

TEST_CASE("train_committee subset sizes", "[knn]") {
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    features.push_back({gaussian(rng)});
    labels.push_back(i % 2 == 0 ? +1 : -1);
  }
  auto data = make_dataset(features, labels);
  auto committee = train_committee(data, 100, 3, 7);
  REQUIRE(committee.members.size() == 100);
  for (const auto& member : committee.members) {
    CHECK(member.reference.size() == 127);  // ceil(0.632 * 200)
    CHECK(member.k == 3);
  }
  SECTION("same seed reproduces member subsets") {
    auto again = train_committee(data, 100, 3, 7);
    for (std::size_t c = 0; c < committee.members.size(); ++c)
      CHECK(committee.members[c].reference == again.members[c].reference);
  }
  SECTION("k* clamps to the subset size") {
    auto small = train_committee(data, 5, 150, 7);
    for (const auto& member : small.members) CHECK(member.k == 127);
  }
}

TEST_CASE("single full-set member equals plain k-NN", "[knn]") {
  std::mt19937_64 rng(91);
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) {
    features.push_back({gaussian(rng), gaussian(rng)});
    labels.push_back(rng() % 2 == 0 ? +1 : -1);
  }
  auto data = make_dataset(features, labels);
  auto committee = train_committee(data, 1, 3, 5);
  committee.members[0].reference.clear();
  for (int i = 0; i < 25; ++i) committee.members[0].reference.push_back(i);

  for (int probe = 0; probe < 50; ++probe) {
    std::vector<double> x{gaussian(rng), gaussian(rng)};
    CHECK(committee_predict(committee, x) == knn_decide(data, x, 3));
  }
}

TEST_CASE("committee_predict vote rules", "[knn]") {
  // Single-point references pin each member's vote.
  auto data = make_dataset({{0.0}, {1.0}, {2.0}}, {+1, -1, +1});
  KnnCommittee committee;
  committee.train = data;
  committee.k_star = 1;
  auto member_voting = [&](int reference_index) {
    KnnMember m;
    m.reference = {reference_index};
    m.k = 1;
    return m;
  };
  committee.members = {member_voting(0), member_voting(1), member_voting(2)};
  CHECK(committee_predict(committee, {0.5}) == +1);  // votes (+1,-1,+1)

  committee.members = {member_voting(0), member_voting(1)};
  CHECK(committee_predict(committee, {0.5}) == -1);  // tie rule

  SECTION("identical members equal any single member") {
    committee.members.assign(100, member_voting(1));
    CHECK(committee_predict(committee, {0.5}) == -1);
  }
  SECTION("invariant under member permutation") {
    committee.members = {member_voting(0), member_voting(1), member_voting(2)};
    auto reversed = committee;
    std::reverse(reversed.members.begin(), reversed.members.end());
    for (double x = -1.0; x <= 3.0; x += 0.25)
      CHECK(committee_predict(committee, {x}) ==
            committee_predict(reversed, {x}));
  }
  SECTION("dimension mismatch") {
    CHECK_THROWS_AS(committee_predict(committee, {1.0, 2.0}),
                    DimensionMismatchError);
  }
}
