#pragma once

#include <string>
#include <vector>

#include "erosym/classifier.hpp"
#include "erosym/corpus.hpp"
#include "erosym/error.hpp"

namespace erosym {

enum class TieRule { prefer_violation };

// Hard majority voting over an ordered list of trained classifiers. Binary
// labels with an odd voter count can never tie; the tie rule exists for
// even ensembles and biases toward raising a warning.
struct VotingEnsemble {
    std::vector<const TrainedClassifier*> voters;
    TieRule tie_rule = TieRule::prefer_violation;

    VotingEnsemble() = default;
    explicit VotingEnsemble(std::vector<const TrainedClassifier*> v,
                            TieRule rule = TieRule::prefer_violation)
        : voters(std::move(v)), tie_rule(rule) {
        if (voters.size() < 2)
            throw DataError("voting ensemble needs at least 2 voters");
        for (const auto* voter : voters)
            if (!voter) throw DataError("voting ensemble: null voter");
    }
};

inline Label hard_vote_one(const VotingEnsemble& ensemble, const FeatureInput& item) {
    int violation_votes = 0;
    for (std::size_t v = 0; v < ensemble.voters.size(); ++v) {
        Label vote;
        try {
            vote = predict(*ensemble.voters[v], item);
        } catch (const Error& e) {
            const auto& meta = ensemble.voters[v]->meta;
            throw DataError("voter " + std::to_string(v) + " (" + to_string(meta.family) + "/" +
                            meta.embedding_id + ") failed: " + e.what());
        }
        violation_votes += vote == Label::violation ? 1 : -1;
    }
    if (violation_votes > 0) return Label::violation;
    if (violation_votes < 0) return Label::non_violation;
    return Label::violation; // prefer_violation
}

inline std::vector<Label> hard_vote(const VotingEnsemble& ensemble,
                                    const std::vector<FeatureInput>& items) {
    std::vector<Label> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(hard_vote_one(ensemble, item));
    return out;
}

// One family voting across embeddings (SVM_w2v, SVM_FT, SVM_GloVe, ...).
inline VotingEnsemble build_family_ensemble(Family family,
                                            const std::vector<std::string>& embedding_ids,
                                            const std::vector<const TrainedClassifier*>& pool) {
    std::vector<const TrainedClassifier*> voters;
    for (const auto& id : embedding_ids) {
        const TrainedClassifier* found = nullptr;
        for (const auto* clf : pool)
            if (clf && clf->meta.family == family && clf->meta.embedding_id == id) {
                found = clf;
                break;
            }
        if (!found)
            throw DataError(std::string("missing trained model: family ") + to_string(family) +
                            ", embedding " + id);
        voters.push_back(found);
    }
    return VotingEnsemble(std::move(voters));
}

// All families voting on one embedding (ML_word2vec = SVM, LR, NB, DT, kNN).
inline VotingEnsemble build_embedding_ensemble(const std::string& embedding_id,
                                               const std::vector<Family>& families,
                                               const std::vector<const TrainedClassifier*>& pool) {
    std::vector<const TrainedClassifier*> voters;
    for (Family family : families) {
        const TrainedClassifier* found = nullptr;
        for (const auto* clf : pool)
            if (clf && clf->meta.family == family && clf->meta.embedding_id == embedding_id) {
                found = clf;
                break;
            }
        if (!found)
            throw DataError(std::string("missing trained model: family ") + to_string(family) +
                            ", embedding " + embedding_id);
        voters.push_back(found);
    }
    return VotingEnsemble(std::move(voters));
}

} // namespace erosym
