#include <catch2/catch.hpp>

#include <vector>

#include "erosym/ensemble.hpp"

using namespace erosym;

namespace {

// Feature-reading stub voters: voter j predicts violation iff x[j] >= 0.
// Items therefore encode the whole prediction matrix directly.
TrainedClassifier coordinate_voter(std::size_t coordinate, std::size_t dim,
                                   const std::string& embedding_id = "stub") {
    LinearSvmModel m;
    m.weights.assign(dim, 0.0);
    m.weights[coordinate] = 1.0;
    m.bias = 0.0;
    TrainedClassifier clf;
    clf.model = m;
    clf.meta.family = Family::svm;
    clf.meta.embedding_id = embedding_id;
    return clf;
}

FeatureInput item_with_votes(const std::vector<int>& votes,
                             const std::string& embedding_id = "stub") {
    DocVector dv;
    for (int v : votes) dv.values.push_back(v ? 1.0 : -1.0);
    dv.hit_count = votes.size();
    FeatureInput fi;
    fi.docvecs.emplace(embedding_id, std::move(dv));
    return fi;
}

} // namespace

TEST_CASE("majority of three voters") {
    std::vector<TrainedClassifier> voters;
    for (std::size_t j = 0; j < 3; ++j) voters.push_back(coordinate_voter(j, 3));
    VotingEnsemble ens({&voters[0], &voters[1], &voters[2]});
    CHECK(hard_vote_one(ens, item_with_votes({1, 0, 1})) == Label::violation);
    CHECK(hard_vote_one(ens, item_with_votes({0, 1, 0})) == Label::non_violation);
}

TEST_CASE("an even split resolves to violation") {
    std::vector<TrainedClassifier> voters;
    for (std::size_t j = 0; j < 4; ++j) voters.push_back(coordinate_voter(j, 4));
    VotingEnsemble ens({&voters[0], &voters[1], &voters[2], &voters[3]});
    CHECK(hard_vote_one(ens, item_with_votes({1, 1, 0, 0})) == Label::violation);
    CHECK(hard_vote_one(ens, item_with_votes({0, 0, 0, 1})) == Label::non_violation);
}

TEST_CASE("exhaustive enumeration matches the truth-table oracle (3 and 5 voters)") {
    for (const std::size_t n : {std::size_t{3}, std::size_t{5}}) {
        std::vector<TrainedClassifier> voters;
        for (std::size_t j = 0; j < n; ++j) voters.push_back(coordinate_voter(j, n));
        std::vector<const TrainedClassifier*> ptrs;
        for (auto& v : voters) ptrs.push_back(&v);
        VotingEnsemble ens(ptrs);

        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            std::vector<int> votes(n);
            std::size_t ones = 0;
            for (std::size_t j = 0; j < n; ++j) {
                votes[j] = (mask >> j) & 1;
                ones += votes[j];
            }
            const Label want = ones * 2 > n ? Label::violation : Label::non_violation;
            CHECK(hard_vote_one(ens, item_with_votes(votes)) == want);
            // odd voter counts can never invoke the tie rule
            CHECK(ones * 2 != n);
        }
    }
}

TEST_CASE("duplicating the voter list leaves the majority unchanged") {
    std::vector<TrainedClassifier> voters;
    for (std::size_t j = 0; j < 3; ++j) voters.push_back(coordinate_voter(j, 3));
    VotingEnsemble once({&voters[0], &voters[1], &voters[2]});
    VotingEnsemble twice(
        {&voters[0], &voters[1], &voters[2], &voters[0], &voters[1], &voters[2]});
    for (std::size_t mask = 0; mask < 8; ++mask) {
        const std::vector<int> votes = {static_cast<int>(mask & 1),
                                        static_cast<int>((mask >> 1) & 1),
                                        static_cast<int>((mask >> 2) & 1)};
        const FeatureInput item = item_with_votes(votes);
        CHECK(hard_vote_one(once, item) == hard_vote_one(twice, item));
    }
}

TEST_CASE("independent error masks give ensemble accuracy 0.896 exactly") {
    // item index as three base-10 digits; voter j errs when digit j < 2,
    // so the three 20% error events are independent by construction
    std::vector<TrainedClassifier> voters;
    for (std::size_t j = 0; j < 3; ++j) voters.push_back(coordinate_voter(j, 3));
    VotingEnsemble ens({&voters[0], &voters[1], &voters[2]});

    std::size_t correct = 0;
    const std::size_t items = 1000;
    for (std::size_t i = 0; i < items; ++i) {
        const Label truth = i % 2 == 0 ? Label::violation : Label::non_violation;
        const std::size_t digits[3] = {i % 10, (i / 10) % 10, (i / 100) % 10};
        std::vector<int> votes(3);
        for (std::size_t j = 0; j < 3; ++j) {
            const bool err = digits[j] < 2;
            const bool truth_pos = truth == Label::violation;
            votes[j] = err ? !truth_pos : truth_pos;
        }
        if (hard_vote_one(ens, item_with_votes(votes)) == truth) ++correct;
    }
    CHECK(correct == 896);
    CHECK(static_cast<double>(correct) / static_cast<double>(items) == Approx(0.896));
    // the analytic value: 0.8^3 + 3 * 0.8^2 * 0.2
    CHECK(0.8 * 0.8 * 0.8 + 3 * 0.8 * 0.8 * 0.2 == Approx(0.896));
}

TEST_CASE("ensembles need at least two voters and reject nulls") {
    std::vector<TrainedClassifier> voters;
    voters.push_back(coordinate_voter(0, 1));
    CHECK_THROWS_AS(VotingEnsemble({&voters[0]}), DataError);
    CHECK_THROWS_AS(VotingEnsemble({&voters[0], nullptr}), DataError);
}

TEST_CASE("build_family_ensemble selects one model per embedding in order") {
    std::vector<TrainedClassifier> pool;
    pool.push_back(coordinate_voter(0, 3, "w2v"));
    pool.push_back(coordinate_voter(1, 3, "ft"));
    pool.push_back(coordinate_voter(2, 3, "glove"));
    pool.back().meta.family = Family::svm;
    TrainedClassifier other = coordinate_voter(0, 3, "w2v");
    other.meta.family = Family::nb;
    pool.push_back(other);

    std::vector<const TrainedClassifier*> ptrs;
    for (auto& p : pool) ptrs.push_back(&p);

    const VotingEnsemble ens = build_family_ensemble(Family::svm, {"w2v", "ft", "glove"}, ptrs);
    REQUIRE(ens.voters.size() == 3);
    CHECK(ens.voters[0]->meta.embedding_id == "w2v");
    CHECK(ens.voters[1]->meta.embedding_id == "ft");
    CHECK(ens.voters[2]->meta.embedding_id == "glove");
    CHECK(ens.voters[0]->meta.family == Family::svm);

    CHECK_THROWS_AS(build_family_ensemble(Family::svm, {"w2v", "missing"}, ptrs), DataError);
    CHECK_THROWS_AS(build_family_ensemble(Family::svm, {"w2v"}, ptrs), DataError);
}

TEST_CASE("build_embedding_ensemble gathers the families on one embedding") {
    std::vector<TrainedClassifier> pool;
    const std::vector<Family> families = {Family::svm, Family::logreg, Family::nb, Family::dt,
                                          Family::knn};
    for (std::size_t j = 0; j < families.size(); ++j) {
        // knn/dt stubs still carry an svm body; only metadata matters here
        TrainedClassifier clf = coordinate_voter(j, 5, "w2v");
        clf.meta.family = families[j];
        pool.push_back(clf);
    }
    std::vector<const TrainedClassifier*> ptrs;
    for (auto& p : pool) ptrs.push_back(&p);

    const VotingEnsemble ens = build_embedding_ensemble("w2v", families, ptrs);
    REQUIRE(ens.voters.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) CHECK(ens.voters[j]->meta.family == families[j]);

    // five binary voters cannot tie: a 3-2 split takes the majority
    CHECK(hard_vote_one(ens, item_with_votes({1, 1, 1, 0, 0}, "w2v")) == Label::violation);
    CHECK(hard_vote_one(ens, item_with_votes({0, 0, 0, 1, 1}, "w2v")) == Label::non_violation);

    CHECK_THROWS_AS(build_embedding_ensemble("glove", families, ptrs), DataError);
}

TEST_CASE("hard_vote maps over items and names failing voters") {
    std::vector<TrainedClassifier> voters;
    for (std::size_t j = 0; j < 3; ++j) voters.push_back(coordinate_voter(j, 3));
    VotingEnsemble ens({&voters[0], &voters[1], &voters[2]});
    const std::vector<FeatureInput> items = {item_with_votes({1, 1, 0}),
                                             item_with_votes({0, 0, 1})};
    const std::vector<Label> out = hard_vote(ens, items);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == Label::violation);
    CHECK(out[1] == Label::non_violation);

    // an item lacking the voter's embedding makes that voter fail by name
    FeatureInput empty;
    try {
        hard_vote_one(ens, empty);
        FAIL("expected failure");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("voter 0") != std::string::npos);
    }
}
