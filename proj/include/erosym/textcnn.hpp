#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "erosym/corpus.hpp"
#include "erosym/embedding.hpp"
#include "erosym/error.hpp"
#include "erosym/metrics.hpp"
#include "erosym/rng.hpp"

namespace erosym {

enum class EmbeddingMode { learned_from_vocab, pretrained_frozen };

inline const char* to_string(EmbeddingMode m) {
    return m == EmbeddingMode::learned_from_vocab ? "learned_from_vocab" : "pretrained_frozen";
}

inline EmbeddingMode embedding_mode_from_string(const std::string& s) {
    if (s == "learned_from_vocab") return EmbeddingMode::learned_from_vocab;
    if (s == "pretrained_frozen") return EmbeddingMode::pretrained_frozen;
    throw UsageError("unknown embedding mode: " + s);
}

struct TextCnnConfig {
    std::size_t emb_dim = 200;
    std::vector<std::size_t> filter_sizes = {3, 4, 5};
    std::size_t filters_per_size = 100;
    double dropout_p = 0.25;
    double learning_rate = 0.001;
    std::size_t batch_size = 16;
    int max_epochs = 100;
    int patience = 8;
    std::size_t max_len = 2000;
    EmbeddingMode embedding_mode = EmbeddingMode::pretrained_frozen;
    std::uint64_t seed = 42;

    std::size_t total_filters() const { return filter_sizes.size() * filters_per_size; }

    void validate() const {
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw DataError("textcnn: dropout_p must be in [0, 1)");
        for (std::size_t s : filter_sizes)
            if (s == 0 || s > max_len)
                throw DataError("textcnn: filter sizes must be in [1, max_len]");
        if (filter_sizes.empty() || filters_per_size == 0)
            throw DataError("textcnn: at least one filter required");
        if (emb_dim == 0 || max_len == 0 || batch_size == 0)
            throw DataError("textcnn: emb_dim, max_len and batch_size must be positive");
    }
};

// Class order of the output layer: index 0 = violation, index 1 =
// non_violation. Exact probability ties predict violation.
struct TextCnnModel {
    TextCnnConfig config;

    // learnedemb mode: id 0 is the PAD/UNK row, pinned to zero and never
    // updated; real tokens start at id 1.
    std::vector<std::string> vocab;
    std::unordered_map<std::string, std::size_t> vocab_index;
    std::vector<double> embedding; // vocab_size x emb_dim

    std::string embedding_id; // frozen mode: the table this model was trained with

    std::vector<std::vector<double>> kernels;   // per size: filters x size x emb_dim
    std::vector<std::vector<double>> conv_bias; // per size: filters
    std::vector<double> fc_w;                   // 2 x total_filters
    std::array<double, 2> fc_b{0.0, 0.0};

    std::size_t token_id(const std::string& token) const {
        const auto it = vocab_index.find(token);
        return it == vocab_index.end() ? 0 : it->second;
    }
};

// One document in the form the network consumes: token ids in learned
// mode, dense rows otherwise. Only the first true_length rows are stored;
// the zero padding out to max_len is implied and handled analytically.
struct CnnInput {
    std::vector<std::size_t> ids; // learned mode, capped at max_len
    std::vector<double> rows;     // frozen mode, true_length x dim
    const SequenceMatrix* seq = nullptr;
    std::size_t true_length = 0;
    std::size_t dim = 0;
};

inline CnnInput make_cnn_input(const TextCnnModel& model,
                               const std::vector<std::string>& tokens,
                               const EmbeddingTable* table) {
    CnnInput in;
    const std::size_t cap = std::min(tokens.size(), model.config.max_len);
    in.true_length = cap;
    in.dim = model.config.emb_dim;
    if (model.config.embedding_mode == EmbeddingMode::learned_from_vocab) {
        in.ids.reserve(cap);
        for (std::size_t i = 0; i < cap; ++i) in.ids.push_back(model.token_id(tokens[i]));
    } else {
        if (!table) throw DataError("textcnn: frozen mode requires an embedding table");
        if (table->dim() != model.config.emb_dim)
            throw DataError("textcnn: table dimension does not match the model");
        in.rows.assign(cap * table->dim(), 0.0);
        for (std::size_t i = 0; i < cap; ++i)
            if (const double* v = table->lookup(tokens[i]))
                for (std::size_t d = 0; d < table->dim(); ++d) in.rows[i * table->dim() + d] = v[d];
    }
    return in;
}

inline CnnInput make_cnn_input(const SequenceMatrix& seq) {
    CnnInput in;
    in.seq = &seq;
    in.true_length = seq.true_length;
    in.dim = seq.dim;
    return in;
}

namespace textcnn_detail {

inline const double* input_row(const TextCnnModel& m, const CnnInput& in, std::size_t i) {
    if (in.seq) return in.seq->row(i);
    if (!in.rows.empty()) return in.rows.data() + i * in.dim;
    return m.embedding.data() + in.ids[i] * m.config.emb_dim;
}

} // namespace textcnn_detail

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
    std::vector<double> pooled;  // total_filters, post-ReLU
    std::vector<double> dropped; // after inverted dropout (training only)
    std::vector<long> arg_pos;   // conv position feeding the pool; -1 = padding region
    std::vector<double> arg_z;   // pre-ReLU value at that position
    std::vector<std::uint8_t> keep;
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
    bool training = false;
};

// Valid 1-D convolution over token positions, ReLU, max-over-time per
// filter, concatenation, inverted dropout (training), affine, softmax.
// Positions whose window lies entirely in the zero padding evaluate to the
// filter bias; they are folded into one comparison so the cost scales with
// true_length, not max_len.
inline std::array<double, 2> forward(const TextCnnModel& m, const CnnInput& in, bool training,
                                     Rng* rng, ForwardTrace* trace = nullptr) {
    const auto& cfg = m.config;
    const std::size_t D = cfg.emb_dim;
    const std::size_t F = cfg.filters_per_size;
    const std::size_t total = cfg.total_filters();
    if (in.true_length > 0 && in.ids.empty() && in.dim != D)
        throw DataError("textcnn: sequence dimension does not match the model");
    if (training && cfg.dropout_p > 0.0 && !rng)
        throw DataError("textcnn: training-mode forward needs an rng for dropout");

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.training = training;
    tr.pooled.assign(total, 0.0);
    tr.arg_pos.assign(total, -1);
    tr.arg_z.assign(total, 0.0);

    const std::size_t true_len = std::min(in.true_length, cfg.max_len);
    for (std::size_t si = 0; si < cfg.filter_sizes.size(); ++si) {
        const std::size_t size = cfg.filter_sizes[si];
        const std::size_t out_len = cfg.max_len - size + 1;
        const std::size_t real_end = std::min(true_len, out_len);
        const auto& K = m.kernels[si];
        for (std::size_t f = 0; f < F; ++f) {
            const double bias = m.conv_bias[si][f];
            double best_a = -std::numeric_limits<double>::infinity();
            double best_z = 0.0;
            long best_t = -1;
            for (std::size_t t = 0; t < real_end; ++t) {
                double z = bias;
                const std::size_t rmax = std::min(size, true_len - t);
                for (std::size_t r = 0; r < rmax; ++r) {
                    const double* x = textcnn_detail::input_row(m, in, t + r);
                    const double* k = K.data() + (f * size + r) * D;
                    for (std::size_t d = 0; d < D; ++d) z += k[d] * x[d];
                }
                const double a = z > 0.0 ? z : 0.0;
                if (a > best_a) {
                    best_a = a;
                    best_z = z;
                    best_t = static_cast<long>(t);
                }
            }
            if (real_end < out_len) {
                const double a = bias > 0.0 ? bias : 0.0;
                if (a > best_a) {
                    best_a = a;
                    best_z = bias;
                    best_t = -1; // padding region: gradient reaches only the bias
                }
            }
            const std::size_t j = si * F + f;
            tr.pooled[j] = best_a;
            tr.arg_pos[j] = best_t;
            tr.arg_z[j] = best_z;
        }
    }

    const double keep_p = 1.0 - cfg.dropout_p;
    if (training && cfg.dropout_p > 0.0) {
        tr.keep.assign(total, 1);
        tr.dropped.assign(total, 0.0);
        for (std::size_t j = 0; j < total; ++j) {
            tr.keep[j] = rng->uniform() < keep_p ? 1 : 0;
            tr.dropped[j] = tr.keep[j] ? tr.pooled[j] / keep_p : 0.0;
        }
    } else {
        tr.keep.assign(total, 1);
        tr.dropped = tr.pooled;
    }

    for (std::size_t k = 0; k < 2; ++k) {
        double z = m.fc_b[k];
        const double* w = m.fc_w.data() + k * total;
        for (std::size_t j = 0; j < total; ++j) z += w[j] * tr.dropped[j];
        tr.logits[k] = z;
    }
    const double mx = std::max(tr.logits[0], tr.logits[1]);
    const double e0 = std::exp(tr.logits[0] - mx), e1 = std::exp(tr.logits[1] - mx);
    tr.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
    return tr.probs;
}

// Cross-entropy against the true label, clamped at 1e-12.
inline double cnn_loss(const std::array<double, 2>& probs, Label truth) {
    const double p = truth == Label::violation ? probs[0] : probs[1];
    return -std::log(std::max(p, 1e-12));
}

inline Label predict_cnn(const TextCnnModel& m, const CnnInput& in) {
    const auto probs = forward(m, in, false, nullptr);
    return probs[0] >= probs[1] ? Label::violation : Label::non_violation;
}

inline Label predict_cnn(const TextCnnModel& m, const SequenceMatrix& seq) {
    const CnnInput in = make_cnn_input(seq);
    return predict_cnn(m, in);
}

// Gradient tensors in the fixed parameter order: embedding (learned mode
// only), kernels per filter size, conv biases per filter size, fc weights,
// fc bias.
struct CnnGradients {
    std::vector<std::vector<double>> tensors;
};

inline std::vector<std::vector<double>*> trainable_params(TextCnnModel& m) {
    std::vector<std::vector<double>*> out;
    if (m.config.embedding_mode == EmbeddingMode::learned_from_vocab) out.push_back(&m.embedding);
    for (auto& k : m.kernels) out.push_back(&k);
    for (auto& b : m.conv_bias) out.push_back(&b);
    out.push_back(&m.fc_w);
    return out; // fc_b handled separately as a fixed-size array
}

namespace textcnn_detail {

// Accumulates the gradient of this item's loss into `g` (fc_b goes into
// gb). The caller divides by the batch size.
inline void backward_item(const TextCnnModel& m, const CnnInput& in, Label truth,
                          const ForwardTrace& tr, CnnGradients& g, std::array<double, 2>& gb) {
    const auto& cfg = m.config;
    const std::size_t D = cfg.emb_dim;
    const std::size_t F = cfg.filters_per_size;
    const std::size_t total = cfg.total_filters();
    const bool learned = cfg.embedding_mode == EmbeddingMode::learned_from_vocab;
    const std::size_t base = learned ? 1 : 0;
    const std::size_t n_sizes = cfg.filter_sizes.size();

    std::array<double, 2> dlogits = tr.probs;
    dlogits[truth == Label::violation ? 0 : 1] -= 1.0;

    auto& g_fcw = g.tensors[base + 2 * n_sizes];
    std::vector<double> dh(total, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
        gb[k] += dlogits[k];
        const double* w = m.fc_w.data() + k * total;
        for (std::size_t j = 0; j < total; ++j) {
            g_fcw[k * total + j] += dlogits[k] * tr.dropped[j];
            dh[j] += w[j] * dlogits[k];
        }
    }

    const double keep_p = 1.0 - cfg.dropout_p;
    for (std::size_t si = 0; si < n_sizes; ++si) {
        const std::size_t size = cfg.filter_sizes[si];
        auto& g_kernel = g.tensors[base + si];
        auto& g_bias = g.tensors[base + n_sizes + si];
        for (std::size_t f = 0; f < F; ++f) {
            const std::size_t j = si * F + f;
            double dpool = dh[j];
            if (tr.training && cfg.dropout_p > 0.0) dpool = tr.keep[j] ? dpool / keep_p : 0.0;
            if (dpool == 0.0) continue;
            if (tr.arg_z[j] <= 0.0) continue; // ReLU gate closed
            if (tr.arg_pos[j] < 0) {
                g_bias[f] += dpool; // padding-region window: bias only
                continue;
            }
            g_bias[f] += dpool;
            const auto t = static_cast<std::size_t>(tr.arg_pos[j]);
            const std::size_t rmax = std::min(size, in.true_length - t);
            for (std::size_t r = 0; r < rmax; ++r) {
                const double* x = input_row(m, in, t + r);
                double* gk = g_kernel.data() + (f * size + r) * D;
                const double* k = m.kernels[si].data() + (f * size + r) * D;
                for (std::size_t d = 0; d < D; ++d) gk[d] += dpool * x[d];
                if (learned) {
                    const std::size_t id = in.ids[t + r];
                    if (id != 0) { // PAD/UNK row stays zero
                        double* ge = g.tensors[0].data() + id * D;
                        for (std::size_t d = 0; d < D; ++d) ge[d] += dpool * k[d];
                    }
                }
            }
        }
    }
}

} // namespace textcnn_detail

// Mean loss over the batch and exact gradients of it. Dropout masks are
// drawn from `rng` in batch order, so a caller that re-seeds gets the same
// masks (this is what the finite-difference checks rely on).
inline double batch_loss_and_gradients(const TextCnnModel& m,
                                       const std::vector<const CnnInput*>& inputs,
                                       const std::vector<Label>& labels, bool training,
                                       Rng* rng, CnnGradients* grads,
                                       std::array<double, 2>* grad_fc_b) {
    if (inputs.empty() || inputs.size() != labels.size())
        throw DataError("textcnn: empty or mismatched batch");

    const bool learned = m.config.embedding_mode == EmbeddingMode::learned_from_vocab;
    if (grads) {
        grads->tensors.clear();
        if (learned) grads->tensors.emplace_back(m.embedding.size(), 0.0);
        for (const auto& k : m.kernels) grads->tensors.emplace_back(k.size(), 0.0);
        for (const auto& b : m.conv_bias) grads->tensors.emplace_back(b.size(), 0.0);
        grads->tensors.emplace_back(m.fc_w.size(), 0.0);
        *grad_fc_b = {0.0, 0.0};
    }

    double loss = 0.0;
    ForwardTrace tr;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        forward(m, *inputs[i], training, rng, &tr);
        loss += cnn_loss(tr.probs, labels[i]);
        if (grads) textcnn_detail::backward_item(m, *inputs[i], labels[i], tr, *grads, *grad_fc_b);
    }

    const double inv = 1.0 / static_cast<double>(inputs.size());
    loss *= inv;
    if (grads) {
        for (auto& t : grads->tensors)
            for (auto& v : t) v *= inv;
        (*grad_fc_b)[0] *= inv;
        (*grad_fc_b)[1] *= inv;
    }
    return loss;
}

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_f1;
    int stopped_epoch = 0; // 1-based
    int best_epoch = 0;    // 1-based, minimal validation loss
};

namespace textcnn_detail {

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m1, m2;

    void init(const std::vector<std::vector<double>>& shapes) {
        m1.clear();
        m2.clear();
        for (const auto& s : shapes) {
            m1.emplace_back(s.size(), 0.0);
            m2.emplace_back(s.size(), 0.0);
        }
    }

    void step(std::vector<std::vector<double>*>& params, std::array<double, 2>& fc_b,
              const CnnGradients& g, const std::array<double, 2>& g_fc_b) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& w = *params[p];
            const auto& gr = g.tensors[p];
            for (std::size_t i = 0; i < w.size(); ++i) {
                m1[p][i] = beta1 * m1[p][i] + (1.0 - beta1) * gr[i];
                m2[p][i] = beta2 * m2[p][i] + (1.0 - beta2) * gr[i] * gr[i];
                w[i] -= lr * (m1[p][i] / c1) / (std::sqrt(m2[p][i] / c2) + eps);
            }
        }
        auto& mb1 = m1.back(); // last slot reserved for fc_b (size 2)
        auto& mb2 = m2.back();
        for (std::size_t i = 0; i < 2; ++i) {
            mb1[i] = beta1 * mb1[i] + (1.0 - beta1) * g_fc_b[i];
            mb2[i] = beta2 * mb2[i] + (1.0 - beta2) * g_fc_b[i] * g_fc_b[i];
            fc_b[i] -= lr * (mb1[i] / c1) / (std::sqrt(mb2[i] / c2) + eps);
        }
    }
};

} // namespace textcnn_detail

// Initializes a model for the given config. Learned mode builds the
// vocabulary from the training documents (id 0 reserved for PAD/UNK).
inline TextCnnModel init_textcnn(const TextCnnConfig& cfg,
                                 const std::vector<std::vector<std::string>>& train_docs,
                                 const EmbeddingTable* table) {
    cfg.validate();
    TextCnnModel m;
    m.config = cfg;
    Rng rng(cfg.seed);

    if (cfg.embedding_mode == EmbeddingMode::learned_from_vocab) {
        m.vocab.push_back("<pad>");
        for (const auto& doc : train_docs)
            for (const auto& tok : doc)
                if (!m.vocab_index.contains(tok)) {
                    m.vocab_index.emplace(tok, m.vocab.size());
                    m.vocab.push_back(tok);
                }
        m.embedding.assign(m.vocab.size() * cfg.emb_dim, 0.0);
        for (std::size_t i = cfg.emb_dim; i < m.embedding.size(); ++i)
            m.embedding[i] = rng.uniform(-0.05, 0.05);
    } else {
        if (!table) throw DataError("textcnn: frozen mode requires an embedding table");
        if (table->dim() != cfg.emb_dim)
            throw DataError("textcnn: emb_dim does not match the embedding table");
        m.embedding_id = table->id();
    }

    for (std::size_t s : cfg.filter_sizes) {
        const double fan_in = static_cast<double>(s * cfg.emb_dim);
        const double limit = std::sqrt(6.0 / (fan_in + static_cast<double>(cfg.filters_per_size)));
        std::vector<double> k(cfg.filters_per_size * s * cfg.emb_dim);
        for (auto& v : k) v = rng.uniform(-limit, limit);
        m.kernels.push_back(std::move(k));
        m.conv_bias.emplace_back(cfg.filters_per_size, 0.0);
    }
    const double fc_limit = std::sqrt(6.0 / (static_cast<double>(cfg.total_filters()) + 2.0));
    m.fc_w.assign(2 * cfg.total_filters(), 0.0);
    for (auto& v : m.fc_w) v = rng.uniform(-fc_limit, fc_limit);
    return m;
}

// Adam training with per-epoch seeded shuffling and patience-based early
// stopping on validation loss. Returns the parameters of the best epoch.
// `val_loss_override` substitutes the monitored loss (test hook for the
// patience contract).
inline std::pair<TextCnnModel, TrainHistory> train_textcnn(
    const std::vector<std::vector<std::string>>& train_docs, const std::vector<Label>& train_y,
    const std::vector<std::vector<std::string>>& val_docs, const std::vector<Label>& val_y,
    const TextCnnConfig& cfg, const EmbeddingTable* table = nullptr,
    const std::function<double(int, double)>& val_loss_override = nullptr) {
    if (train_docs.size() != train_y.size() || val_docs.size() != val_y.size())
        throw DataError("textcnn: documents/labels size mismatch");
    {
        bool pos = false, neg = false;
        for (Label l : train_y) (l == Label::violation ? pos : neg) = true;
        if (!pos || !neg) throw DataError("textcnn: both classes must be present in trainset");
    }

    TextCnnModel model = init_textcnn(cfg, train_docs, table);
    Rng rng(Rng(cfg.seed).next()); // training stream distinct from init stream

    std::vector<CnnInput> train_in, val_in;
    for (const auto& d : train_docs) train_in.push_back(make_cnn_input(model, d, table));
    for (const auto& d : val_docs) val_in.push_back(make_cnn_input(model, d, table));

    auto params = trainable_params(model);
    textcnn_detail::Adam adam;
    adam.lr = cfg.learning_rate;
    {
        std::vector<std::vector<double>> shapes;
        for (auto* p : params) shapes.push_back(*p);
        shapes.emplace_back(2, 0.0); // fc_b slot
        adam.init(shapes);
    }

    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    TextCnnModel best_model = model;
    int since_best = 0;

    std::vector<std::size_t> order(train_in.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_size);
            std::vector<const CnnInput*> batch;
            std::vector<Label> labels;
            for (std::size_t i = b; i < e; ++i) {
                batch.push_back(&train_in[order[i]]);
                labels.push_back(train_y[order[i]]);
            }
            CnnGradients grads;
            std::array<double, 2> g_fc_b{};
            epoch_loss +=
                batch_loss_and_gradients(model, batch, labels, true, &rng, &grads, &g_fc_b);
            ++batches;
            adam.step(params, model.fc_b, grads, g_fc_b);
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(batches));

        double vloss = 0.0;
        std::vector<Label> preds, truths;
        for (std::size_t i = 0; i < val_in.size(); ++i) {
            ForwardTrace tr;
            forward(model, val_in[i], false, nullptr, &tr);
            vloss += cnn_loss(tr.probs, val_y[i]);
            preds.push_back(tr.probs[0] >= tr.probs[1] ? Label::violation : Label::non_violation);
            truths.push_back(val_y[i]);
        }
        vloss = val_in.empty() ? 0.0 : vloss / static_cast<double>(val_in.size());
        if (val_loss_override) vloss = val_loss_override(epoch, vloss);
        history.val_loss.push_back(vloss);
        history.val_f1.push_back(val_in.empty() ? 0.0 : metrics(confusion(preds, truths)).f1);

        if (vloss < best_val) {
            best_val = vloss;
            history.best_epoch = epoch;
            best_model = model;
            since_best = 0;
        } else {
            ++since_best;
        }
        history.stopped_epoch = epoch;
        if (since_best >= cfg.patience) break;
    }
    return {std::move(best_model), std::move(history)};
}

} // namespace erosym
