// erosym: mine code-review comments for architecture-erosion violation
// symptoms, train classifiers over word embeddings, evaluate and report.
//
// Subcommands: ingest, prep, train, evaluate, predict. Every run is
// deterministic given its configuration and seed; the resolved config is
// written next to the outputs under a run id derived from its content.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "erosym/classical.hpp"
#include "erosym/classifier.hpp"
#include "erosym/corpus.hpp"
#include "erosym/embedding.hpp"
#include "erosym/ensemble.hpp"
#include "erosym/error.hpp"
#include "erosym/gerrit.hpp"
#include "erosym/http_transport.hpp"
#include "erosym/metrics.hpp"
#include "erosym/pca.hpp"
#include "erosym/report.hpp"
#include "erosym/runconfig.hpp"
#include "erosym/textcnn.hpp"
#include "erosym/textprep.hpp"
#include "erosym/version.hpp"

namespace fs = std::filesystem;
using namespace erosym;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRefusal = 3;
constexpr int kExitData = 4;
constexpr int kExitInternal = 5;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

PreprocessConfig make_prep_config(const std::string& stopword_path) {
    PreprocessConfig cfg;
    if (!stopword_path.empty()) cfg.stopword_list = load_stopwords(stopword_path);
    return cfg;
}

struct PreparedData {
    std::vector<std::vector<std::string>> tokens; // per item
    std::vector<Label> labels;
};

PreparedData prepare(const Dataset& d, const PreprocessConfig& prep) {
    PreparedData out;
    out.tokens.reserve(d.items.size());
    for (const auto& item : d.items) {
        out.tokens.push_back(preprocess(item.comment.message, prep));
        out.labels.push_back(item.label);
    }
    return out;
}

LabeledVectors featurize(const PreparedData& p, const EmbeddingTable& table) {
    LabeledVectors lv;
    lv.x.reserve(p.tokens.size());
    for (const auto& toks : p.tokens) lv.x.push_back(doc_vector(toks, table).values);
    lv.y = p.labels;
    return lv;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << content;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/run_" + cfg.run_id() + ".config",
                    std::string("# erosym ") + kVersion + "\n" + cfg.serialize());
}

// PCA reduction of a loaded table, keeping its identifier. This is how a
// single high-dimensional vector file serves a dimensionality sweep.
EmbeddingTable reduce_table(EmbeddingTable table, std::size_t target_dim) {
    if (target_dim == 0 || target_dim == table.dim()) return table;
    const PcaTransform t = fit_pca(table, target_dim);
    EmbeddingTable reduced = apply_pca(t, table);
    reduced.rename(table.id());
    return reduced;
}

// Config-file / environment / flag merging: flags win, then file values.
RunConfig load_file_config(const std::string& config_flag) {
    std::string path = config_flag;
    if (path.empty())
        if (const char* env = std::getenv("ERSN_CONFIG")) path = env;
    if (path.empty()) return {};
    return RunConfig::load(path);
}

struct OptBinder {
    CLI::App* cmd;
    RunConfig* file_cfg;
    RunConfig* resolved;

    // Applies precedence and records the effective value.
    void finalize(const std::string& flag, const std::string& key, std::string& value) {
        if (cmd->count(flag) == 0 && file_cfg->has(key)) value = file_cfg->get(key);
        if (!value.empty()) resolved->set(key, value);
    }
    void finalize_num(const std::string& flag, const std::string& key, double& value) {
        if (cmd->count(flag) == 0 && file_cfg->has(key)) value = std::stod(file_cfg->get(key));
        resolved->set(key, fmt17(value));
    }
    void finalize_int(const std::string& flag, const std::string& key, long long& value) {
        if (cmd->count(flag) == 0 && file_cfg->has(key))
            value = std::stoll(file_cfg->get(key));
        resolved->set(key, std::to_string(value));
    }
};

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

// Loads a recorded-response directory: index.json maps request paths to
// body files, replayed in place of the network.
ReplayTransport load_fixture_transport(const std::string& dir) {
    ReplayTransport t;
    std::ifstream in(dir + "/index.json");
    if (!in) throw DataError("fixture directory has no index.json: " + dir);
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed fixture index.json: ") + e.what());
    }
    for (const auto& entry : index) {
        const std::string path = entry.at("path").get<std::string>();
        const int status = entry.value("status", 200);
        std::ifstream body_in(dir + "/" + entry.at("body_file").get<std::string>(),
                              std::ios::binary);
        if (!body_in)
            throw DataError("fixture body file missing: " +
                            entry.at("body_file").get<std::string>());
        std::string body((std::istreambuf_iterator<char>(body_in)),
                         std::istreambuf_iterator<char>());
        t.add(path, status, std::move(body));
    }
    return t;
}

int run_ingest(const std::string& base_url, const std::string& project,
               const std::string& after, const std::string& before, const std::string& status,
               const std::string& keywords_file, const std::string& out_path, bool force,
               const std::string& fixture_dir, const std::string& user,
               const std::string& token, long long page_size) {
    if (fs::exists(out_path) && !force) {
        std::cerr << "refusing to overwrite " << out_path << " (use --force)\n";
        return kExitRefusal;
    }

    GerritEndpoint endpoint;
    endpoint.base_url = base_url;
    endpoint.page_size = static_cast<int>(page_size);
    if (!user.empty()) endpoint.credentials = {{user, token}};

    ChangeQuery query;
    query.project = project;
    query.after = after;
    query.before = before;
    if (status == "merged") query.status = ChangeStatus::merged;
    else if (status == "abandoned") query.status = ChangeStatus::abandoned;
    else if (status == "open") query.status = ChangeStatus::open;
    else if (status == "any") query.status = ChangeStatus::any;
    else throw UsageError("unknown status: " + status);

    std::unique_ptr<Transport> transport;
    GerritClient::SleepFn sleep = GerritClient::default_sleep();
    if (!fixture_dir.empty()) {
        transport = std::make_unique<ReplayTransport>(load_fixture_transport(fixture_dir));
        sleep = [](int) {}; // replay needs no pacing
    } else {
        transport = std::make_unique<HttplibTransport>(endpoint);
    }
    GerritClient client(endpoint, *transport, sleep);

    const auto changes = client.fetch_changes(query);
    std::vector<ReviewComment> comments;
    for (const auto& change : changes) {
        auto batch = client.fetch_comments(change);
        comments.insert(comments.end(), batch.begin(), batch.end());
    }

    const std::size_t fetched = comments.size();
    if (!keywords_file.empty()) {
        const KeywordSet kw = load_keywords(keywords_file);
        comments = filter_by_keywords(comments, kw);
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + out_path);
    for (const auto& c : comments) out << comment_to_json(c).dump() << '\n';

    std::string log = "changes: " + std::to_string(changes.size()) +
                      "\ncomments_fetched: " + std::to_string(fetched) +
                      "\ncomments_kept: " + std::to_string(comments.size()) + "\n";
    write_text_file(out_path + ".log", log);
    std::cerr << log;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// prep
// ---------------------------------------------------------------------------

int run_prep(const std::string& data_path, const std::string& stopwords,
             const std::string& out_path) {
    const PreprocessConfig prep = make_prep_config(stopwords);
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + data_path);
    std::ostream* out = &std::cout;
    std::ofstream file_out;
    if (!out_path.empty()) {
        file_out.open(out_path, std::ios::binary);
        if (!file_out) throw DataError("cannot write " + out_path);
        out = &file_out;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        const ReviewComment c = comment_from_json(j, line_no);
        nlohmann::ordered_json rec;
        rec["id"] = c.id;
        rec["tokens"] = preprocess(c.message, prep);
        *out << rec.dump() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string grid_scores_csv(const GridSearchResult& result) {
    std::string csv = "point";
    if (!result.table.empty())
        for (const auto& [k, _] : result.table.front().point) csv += "," + k;
    csv += ",precision,recall,f1,accuracy\n";
    for (std::size_t i = 0; i < result.table.size(); ++i) {
        const auto& row = result.table[i];
        csv += std::to_string(i);
        for (const auto& [_, v] : row.point) csv += "," + fmt17(v);
        csv += "," + fmt17(row.val.precision) + "," + fmt17(row.val.recall) + "," +
               fmt17(row.val.f1) + "," + fmt17(row.val.accuracy) + "\n";
    }
    return csv;
}

std::string history_csv(const TrainHistory& h) {
    std::string csv = "epoch,train_loss,val_loss,val_f1\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        csv += std::to_string(e + 1) + "," + fmt17(h.train_loss[e]) + "," +
               fmt17(h.val_loss[e]) + "," + fmt17(h.val_f1[e]) + "\n";
    csv += "stopped_epoch," + std::to_string(h.stopped_epoch) + ",best_epoch," +
           std::to_string(h.best_epoch) + "\n";
    return csv;
}

int run_train(RunConfig& resolved, const std::string& family_name, const std::string& data_path,
              const std::string& stopwords, const std::string& embedding_file,
              std::string embedding_id, long long embedding_dim, long long reduce_dim,
              long long seed, const std::string& out_dir, bool balance, double train_frac,
              double val_frac, double test_frac, const std::string& embedding_mode,
              long long max_len, long long emb_dim, long long max_epochs, long long patience,
              long long batch_size, double dropout, double learning_rate,
              const std::string& filter_sizes_csv, long long filters_per_size) {
    const Family family = family_from_string(family_name);

    Dataset dataset = load_dataset(data_path);
    if (balance) dataset = balance_classes(dataset, static_cast<std::uint64_t>(seed));
    SplitSpec spec;
    spec.train_frac = train_frac;
    spec.val_frac = val_frac;
    spec.test_frac = test_frac;
    spec.seed = static_cast<std::uint64_t>(seed);
    auto [train_set, val_set, test_set] = split(dataset, spec);

    const PreprocessConfig prep = make_prep_config(stopwords);
    const PreparedData train_p = prepare(train_set, prep);
    const PreparedData val_p = prepare(val_set, prep);

    std::optional<EmbeddingTable> table;
    if (!embedding_file.empty()) {
        if (embedding_id.empty()) embedding_id = fs::path(embedding_file).stem().string();
        std::vector<std::string> warnings;
        table = load_text_vectors(embedding_file,
                                  embedding_dim > 0
                                      ? std::optional<std::size_t>(
                                            static_cast<std::size_t>(embedding_dim))
                                      : std::nullopt,
                                  &warnings, embedding_kind_from_string(embedding_id),
                                  embedding_id);
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
        if (reduce_dim > 0)
            table = reduce_table(std::move(*table), static_cast<std::size_t>(reduce_dim));
    }

    fs::create_directories(out_dir);
    const std::string run_id = resolved.run_id();
    TrainedClassifier clf;
    clf.meta.family = family;
    clf.meta.seed = static_cast<std::uint64_t>(seed);
    std::string score_csv;

    if (family == Family::textcnn) {
        TextCnnConfig cfg;
        cfg.embedding_mode = embedding_mode_from_string(
            embedding_mode.empty() ? "pretrained_frozen" : embedding_mode);
        cfg.max_len = static_cast<std::size_t>(max_len);
        cfg.emb_dim = static_cast<std::size_t>(emb_dim);
        cfg.max_epochs = static_cast<int>(max_epochs);
        cfg.patience = static_cast<int>(patience);
        cfg.batch_size = static_cast<std::size_t>(batch_size);
        cfg.dropout_p = dropout;
        cfg.learning_rate = learning_rate;
        cfg.filters_per_size = static_cast<std::size_t>(filters_per_size);
        cfg.seed = static_cast<std::uint64_t>(seed);
        if (!filter_sizes_csv.empty()) {
            cfg.filter_sizes.clear();
            std::size_t pos = 0;
            while (pos < filter_sizes_csv.size()) {
                const auto comma = filter_sizes_csv.find(',', pos);
                const std::string tok = filter_sizes_csv.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos);
                cfg.filter_sizes.push_back(static_cast<std::size_t>(std::stoul(tok)));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        }
        const EmbeddingTable* tbl = nullptr;
        if (cfg.embedding_mode == EmbeddingMode::pretrained_frozen) {
            if (!table) throw UsageError("textcnn pretrained_frozen mode needs --embedding");
            cfg.emb_dim = table->dim();
            tbl = &*table;
        }
        auto [model, history] =
            train_textcnn(train_p.tokens, train_p.labels, val_p.tokens, val_p.labels, cfg, tbl);
        clf.meta.embedding_id = tbl ? tbl->id() : "vocabulary";
        clf.meta.embedding_dim = cfg.emb_dim;
        clf.model = std::move(model);
        score_csv = history_csv(history);
    } else {
        if (!table) throw UsageError("classical families need --embedding");
        const LabeledVectors train_lv = featurize(train_p, *table);
        const LabeledVectors val_lv = featurize(val_p, *table);
        const GridSearchResult result = grid_search(default_grid(family), train_lv, val_lv,
                                                    static_cast<std::uint64_t>(seed));
        clf.meta.embedding_id = table->id();
        clf.meta.embedding_dim = table->dim();
        clf.meta.grid_point = result.best_point;
        std::visit([&](auto&& m) { clf.model = std::move(m); },
                   ClassicalModel(result.best));
        score_csv = grid_scores_csv(result);
    }

    save_bundle(clf, out_dir + "/model_" + run_id + ".json");
    write_text_file(out_dir + "/scores_" + run_id + ".csv", score_csv);
    write_resolved_config(resolved, out_dir);
    std::cerr << "run " << run_id << ": model and score table written to " << out_dir << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct Manifest {
    std::vector<std::pair<std::string, std::string>> embeddings; // id -> path
    std::map<std::string, std::size_t> dims;                     // id -> declared file dim
    std::map<std::string, std::size_t> reduce_dims;              // id -> PCA target
    std::vector<std::string> bundle_paths;
};

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    Manifest m;
    for (const auto& e : j.value("embeddings", nlohmann::json::array())) {
        const std::string id = e.at("id").get<std::string>();
        m.embeddings.emplace_back(id, e.at("path").get<std::string>());
        if (e.contains("dim")) m.dims[id] = e.at("dim").get<std::size_t>();
        if (e.contains("reduce_dim")) m.reduce_dims[id] = e.at("reduce_dim").get<std::size_t>();
    }
    for (const auto& b : j.value("bundles", nlohmann::json::array()))
        m.bundle_paths.push_back(b.get<std::string>());
    return m;
}

MetricsReport evaluate_classifier(const TrainedClassifier& clf,
                                  const std::vector<FeatureInput>& items,
                                  const std::vector<Label>& truths) {
    std::vector<Label> preds;
    preds.reserve(items.size());
    for (const auto& item : items) preds.push_back(predict(clf, item));
    return metrics(confusion(preds, truths));
}

int run_evaluate(RunConfig& resolved, const std::string& mode, long long table_number,
                 const std::string& manifest_path, const std::string& data_path,
                 const std::string& stopwords, long long seed, const std::string& out_dir,
                 bool balance, double train_frac, double val_frac, double test_frac,
                 long long k, const std::string& family_name,
                 const std::string& embedding_file, const std::string& embedding_id_flag,
                 long long reduce_dim) {
    const PreprocessConfig prep = make_prep_config(stopwords);
    Dataset dataset = load_dataset(data_path);
    if (balance) dataset = balance_classes(dataset, static_cast<std::uint64_t>(seed));
    fs::create_directories(out_dir);
    const std::string run_id = resolved.run_id();

    if (mode == "cv") {
        // 10-fold cross-validation of one family on one embedding,
        // trained at the family's default hyperparameters per fold.
        if (family_name.empty() || embedding_file.empty())
            throw UsageError("--mode cv needs --family and --embedding");
        const Family family = family_from_string(family_name);
        std::string embedding_id = embedding_id_flag;
        if (embedding_id.empty()) embedding_id = fs::path(embedding_file).stem().string();
        EmbeddingTable loaded = load_text_vectors(embedding_file, std::nullopt, nullptr,
                                                  embedding_kind_from_string(embedding_id),
                                                  embedding_id);
        if (reduce_dim > 0)
            loaded = reduce_table(std::move(loaded), static_cast<std::size_t>(reduce_dim));
        const EmbeddingTable table = std::move(loaded);

        const FoldTrainer trainer = [&](const Dataset& fold_train) -> Predictor {
            PreparedData p = prepare(fold_train, prep);
            LabeledVectors lv = featurize(p, table);
            ClassicalModel model;
            switch (family) {
                case Family::svm: model = train_svm(lv, 1.0, 100, static_cast<std::uint64_t>(seed)); break;
                case Family::logreg: model = train_logreg(lv, 0.01); break;
                case Family::nb: model = train_nb(lv); break;
                case Family::dt: model = train_dt(lv); break;
                case Family::knn: {
                    const int n = static_cast<int>(lv.size());
                    const int k = n >= 5 ? 5 : (n % 2 ? n : n - 1);
                    model = train_knn(lv, k);
                    break;
                }
                default: throw UsageError("cv mode supports the classical families");
            }
            return [&, model](const LabeledComment& item) {
                const auto tokens = preprocess(item.comment.message, prep);
                return predict(model, doc_vector(tokens, table).values);
            };
        };
        const CvReport report =
            cross_validate(trainer, dataset, static_cast<int>(k), static_cast<std::uint64_t>(seed));

        std::string csv = "fold,precision,recall,f1,accuracy\n";
        for (std::size_t f = 0; f < report.folds.size(); ++f) {
            const auto& m = report.folds[f];
            csv += std::to_string(f) + "," + fmt17(m.precision) + "," + fmt17(m.recall) + "," +
                   fmt17(m.f1) + "," + fmt17(m.accuracy) + "\n";
        }
        csv += "mean," + fmt17(report.mean.precision) + "," + fmt17(report.mean.recall) + "," +
               fmt17(report.mean.f1) + "," + fmt17(report.mean.accuracy) + "\n";
        csv += "stddev," + fmt17(report.stddev.precision) + "," + fmt17(report.stddev.recall) +
               "," + fmt17(report.stddev.f1) + "," + fmt17(report.stddev.accuracy) + "\n";
        write_text_file(out_dir + "/cv_" + run_id + ".csv", csv);
        write_resolved_config(resolved, out_dir);
        std::cerr << "run " << run_id << ": cv report written to " << out_dir << '\n';
        return kExitOk;
    }

    // table modes share the manifest, the embedding set and the test split
    if (manifest_path.empty()) throw UsageError("table evaluation needs --manifest");
    const Manifest manifest = load_manifest(manifest_path);

    EmbeddingSet embeddings;
    std::vector<std::string> embedding_order;
    for (const auto& [id, path] : manifest.embeddings) {
        std::optional<std::size_t> want;
        if (const auto it = manifest.dims.find(id); it != manifest.dims.end()) want = it->second;
        EmbeddingTable table =
            load_text_vectors(path, want, nullptr, embedding_kind_from_string(id), id);
        if (const auto it = manifest.reduce_dims.find(id); it != manifest.reduce_dims.end())
            table = reduce_table(std::move(table), it->second);
        embeddings.add(std::move(table));
        embedding_order.push_back(id);
    }

    std::vector<TrainedClassifier> bundles;
    for (const auto& path : manifest.bundle_paths) bundles.push_back(load_bundle(path));
    std::vector<const TrainedClassifier*> pool;
    for (const auto& b : bundles) pool.push_back(&b);

    SplitSpec spec;
    spec.train_frac = train_frac;
    spec.val_frac = val_frac;
    spec.test_frac = test_frac;
    spec.seed = static_cast<std::uint64_t>(seed);
    auto [train_set, val_set, test_set] = split(dataset, spec);

    std::vector<FeatureInput> items;
    std::vector<Label> truths;
    for (const auto& item : test_set.items) {
        FeatureInput fi;
        fi.tokens = preprocess(item.comment.message, prep);
        fi.embeddings = &embeddings;
        for (const auto& id : embedding_order)
            fi.docvecs.emplace(id, doc_vector(fi.tokens, *embeddings.find(id)));
        items.push_back(std::move(fi));
        truths.push_back(item.label);
    }

    const auto find_bundle = [&](Family f, const std::string& emb) -> const TrainedClassifier* {
        for (const auto* b : pool)
            if (b->meta.family == f && b->meta.embedding_id == emb) return b;
        return nullptr;
    };

    const std::vector<Family> kMlFamilies = {Family::svm, Family::logreg, Family::nb,
                                             Family::dt, Family::knn};
    const auto family_display = [](Family f) -> std::string {
        switch (f) {
            case Family::svm: return "SVM";
            case Family::logreg: return "LR";
            case Family::nb: return "NB";
            case Family::dt: return "DT";
            case Family::knn: return "kNN";
            default: return "TextCNN";
        }
    };

    ReportDoc doc;
    if (table_number == 2) {
        MetricGrid grid;
        for (Family f : kMlFamilies) grid.rows.push_back(family_display(f));
        grid.cols = embedding_order;
        for (Family f : kMlFamilies)
            for (const auto& emb : embedding_order) {
                const auto* b = find_bundle(f, emb);
                if (!b)
                    throw DataError("missing bundle for (" + family_display(f) + ", " + emb +
                                    ")");
                grid.put(family_display(f), emb, evaluate_classifier(*b, items, truths));
            }
        doc = render_table2(grid);
    } else if (table_number == 3) {
        std::vector<std::pair<std::string, MetricsReport>> rows;
        for (const auto* b : pool)
            if (b->meta.family == Family::textcnn) {
                const std::string name = b->meta.embedding_id == "vocabulary"
                                             ? "TextCNN_voc"
                                             : "TextCNN_" + b->meta.embedding_id;
                rows.emplace_back(name, evaluate_classifier(*b, items, truths));
            }
        if (rows.empty()) throw DataError("no textcnn bundles in the manifest");
        doc = render_table3(rows);
    } else if (table_number == 4) {
        MetricGrid grid;
        // the dimension sweep is declared by the manifest embeddings
        std::vector<std::size_t> dims;
        for (const auto& id : embedding_order) {
            const std::size_t d = embeddings.find(id)->dim();
            if (std::find(dims.begin(), dims.end(), d) == dims.end()) dims.push_back(d);
        }
        std::sort(dims.begin(), dims.end());
        for (std::size_t d : dims) grid.cols.push_back(std::to_string(d) + "-dim");
        std::vector<Family> families = kMlFamilies;
        families.push_back(Family::textcnn);
        for (Family f : families) grid.rows.push_back(family_display(f));
        for (Family f : families)
            for (std::size_t d : dims) {
                const TrainedClassifier* found = nullptr;
                for (const auto* b : pool)
                    if (b->meta.family == f && b->meta.embedding_dim == d) found = b;
                if (!found)
                    throw DataError("missing bundle for (" + family_display(f) + ", " +
                                    std::to_string(d) + "-dim)");
                grid.put(family_display(f), std::to_string(d) + "-dim",
                         evaluate_classifier(*found, items, truths));
            }
        doc = render_table4(grid);
    } else if (table_number == 5 || table_number == 6) {
        const auto metric_max = [](const MetricsReport& a, const MetricsReport& b) {
            MetricsReport r;
            r.precision = std::max(a.precision, b.precision);
            r.recall = std::max(a.recall, b.recall);
            r.f1 = std::max(a.f1, b.f1);
            r.accuracy = std::max(a.accuracy, b.accuracy);
            return r;
        };
        const auto metric_add = [](MetricsReport& a, const MetricsReport& b) {
            a.precision += b.precision;
            a.recall += b.recall;
            a.f1 += b.f1;
            a.accuracy += b.accuracy;
        };
        const auto metric_scale = [](MetricsReport& a, double s) {
            a.precision *= s;
            a.recall *= s;
            a.f1 *= s;
            a.accuracy *= s;
        };

        std::vector<std::pair<std::string, EnsembleRow>> rows;
        if (table_number == 5) {
            std::vector<Family> families = kMlFamilies;
            families.push_back(Family::textcnn);
            for (Family f : families) {
                std::vector<const TrainedClassifier*> members;
                for (const auto& emb : embedding_order)
                    if (const auto* b = find_bundle(f, emb)) members.push_back(b);
                if (members.size() < 2) {
                    if (f == Family::textcnn) continue; // optional row
                    throw DataError("family " + family_display(f) +
                                    " has fewer than 2 embedding models");
                }
                EnsembleRow row;
                MetricsReport best, mean;
                bool first = true;
                for (const auto* b : members) {
                    const MetricsReport m = evaluate_classifier(*b, items, truths);
                    metric_add(mean, m);
                    best = first ? m : metric_max(best, m);
                    first = false;
                }
                metric_scale(mean, 1.0 / static_cast<double>(members.size()));
                row.mean = mean;
                row.best = best;
                const VotingEnsemble ens{std::vector<const TrainedClassifier*>(members)};
                row.voting = metrics(confusion(hard_vote(ens, items), truths));
                rows.emplace_back(family_display(f), row);
            }
            doc = render_table5(rows);
        } else {
            for (const auto& emb : embedding_order) {
                std::vector<const TrainedClassifier*> members;
                for (Family f : kMlFamilies) {
                    const auto* b = find_bundle(f, emb);
                    if (!b)
                        throw DataError("missing bundle for (" + family_display(f) + ", " +
                                        emb + ")");
                    members.push_back(b);
                }
                EnsembleRow row;
                MetricsReport best, mean;
                bool first = true;
                for (const auto* b : members) {
                    const MetricsReport m = evaluate_classifier(*b, items, truths);
                    metric_add(mean, m);
                    best = first ? m : metric_max(best, m);
                    first = false;
                }
                metric_scale(mean, 1.0 / static_cast<double>(members.size()));
                row.mean = mean;
                row.best = best;
                const VotingEnsemble ens{std::vector<const TrainedClassifier*>(members)};
                row.voting = metrics(confusion(hard_vote(ens, items), truths));
                rows.emplace_back("ML_" + emb, row);
            }
            doc = render_table6(rows);
        }
    } else {
        throw UsageError("--table must be one of 2, 3, 4, 5, 6");
    }

    write_report(doc, out_dir, static_cast<int>(table_number), run_id);
    write_resolved_config(resolved, out_dir);
    std::cerr << "run " << run_id << ": table " << table_number << " written to " << out_dir
              << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int run_predict(const std::vector<std::string>& bundle_paths, const std::string& text,
                const std::string& data_path, const std::string& stopwords,
                const std::vector<std::string>& embedding_specs, const std::string& out_path) {
    if (bundle_paths.empty()) throw UsageError("predict needs at least one --bundle");
    const PreprocessConfig prep = make_prep_config(stopwords);

    EmbeddingSet embeddings;
    for (const auto& spec : embedding_specs) {
        // id=path or id=path@target_dim (PCA reduction after loading)
        const auto eq = spec.find('=');
        std::string id, path;
        if (eq == std::string::npos) {
            path = spec;
            id = fs::path(path).stem().string();
        } else {
            id = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        }
        std::size_t target = 0;
        if (const auto at = path.rfind('@'); at != std::string::npos) {
            target = std::stoul(path.substr(at + 1));
            path.resize(at);
        }
        EmbeddingTable table =
            load_text_vectors(path, std::nullopt, nullptr, embedding_kind_from_string(id), id);
        if (target > 0) table = reduce_table(std::move(table), target);
        embeddings.add(std::move(table));
    }

    std::vector<TrainedClassifier> bundles;
    for (const auto& p : bundle_paths) bundles.push_back(load_bundle(p));
    std::vector<const TrainedClassifier*> pool;
    for (const auto& b : bundles) pool.push_back(&b);

    const auto classify = [&](const std::string& message) {
        FeatureInput fi;
        fi.tokens = preprocess(message, prep);
        fi.embeddings = &embeddings;
        if (pool.size() == 1) return predict(*pool.front(), fi);
        const VotingEnsemble ens{std::vector<const TrainedClassifier*>(pool)};
        return hard_vote_one(ens, fi);
    };

    std::ostream* out = &std::cout;
    std::ofstream file_out;
    if (!out_path.empty()) {
        file_out.open(out_path, std::ios::binary);
        if (!file_out) throw DataError("cannot write " + out_path);
        out = &file_out;
    }

    if (!text.empty()) {
        *out << to_string(classify(text)) << '\n';
        return kExitOk;
    }
    if (data_path.empty()) throw UsageError("predict needs --text or --data");

    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + data_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        const ReviewComment c = comment_from_json(j, line_no);
        nlohmann::ordered_json rec;
        rec["id"] = c.id;
        rec["label"] = to_string(classify(c.message));
        *out << rec.dump() << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"identify architecture-erosion violation symptoms in code review comments"};
    app.set_version_flag("--version", std::string("erosym ") + kVersion);
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "run configuration file (key=value lines)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "mine review comments from a Gerrit server");
    std::string base_url, project, after, before, status = "merged", keywords_file, out_path;
    std::string fixture_dir, user, token;
    long long page_size = 100;
    bool force = false;
    ingest->add_option("--base-url", base_url, "Gerrit base URL")->required();
    ingest->add_option("--project", project, "project to query")->required();
    ingest->add_option("--after", after, "only changes after this date (YYYY-MM-DD)");
    ingest->add_option("--before", before, "only changes before this date (YYYY-MM-DD)");
    ingest->add_option("--status", status, "change status filter (merged|abandoned|open|any)");
    ingest->add_option("--keywords-file", keywords_file, "keyword file, one term per line");
    ingest->add_option("--out", out_path, "output JSONL path")->required();
    ingest->add_flag("--force", force, "overwrite the output file if it exists");
    ingest->add_option("--fixture-dir", fixture_dir, "replay recorded responses from this dir");
    ingest->add_option("--user", user, "basic auth user");
    ingest->add_option("--token", token, "basic auth token");
    ingest->add_option("--page-size", page_size, "changes per page");

    // prep
    auto* prep = app.add_subcommand("prep", "preprocess messages into token lists");
    std::string prep_data, prep_stopwords, prep_out;
    prep->add_option("--data", prep_data, "input JSONL")->required();
    prep->add_option("--stopwords", prep_stopwords, "stopword list file");
    prep->add_option("--out", prep_out, "output JSONL (stdout when absent)");

    // train
    auto* train = app.add_subcommand("train", "train one classifier family");
    std::string family, train_data, train_stopwords, embedding_file, embedding_id;
    std::string embedding_mode, filter_sizes_csv, out_dir = ".";
    long long embedding_dim = 0, seed = 42, max_len = 2000, emb_dim = 200;
    long long max_epochs = 100, patience = 8, batch_size = 16, filters_per_size = 100;
    double dropout = 0.25, learning_rate = 0.001;
    double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
    bool no_balance = false;
    train->add_option("--family", family, "svm|logreg|nb|dt|knn|textcnn")->required();
    train->add_option("--data", train_data, "labeled dataset JSONL")->required();
    train->add_option("--stopwords", train_stopwords, "stopword list file");
    train->add_option("--embedding", embedding_file, "pre-trained text vector file");
    train->add_option("--embedding-id", embedding_id, "identifier for the embedding");
    train->add_option("--embedding-dim", embedding_dim, "expected embedding dimension");
    long long reduce_dim = 0;
    train->add_option("--reduce-dim", reduce_dim,
                      "PCA-reduce the loaded embedding to this dimensionality");
    train->add_option("--seed", seed, "PRNG seed");
    train->add_option("--out-dir", out_dir, "output directory");
    train->add_flag("--no-balance", no_balance, "skip class balancing");
    train->add_option("--train-frac", train_frac, "training fraction");
    train->add_option("--val-frac", val_frac, "validation fraction");
    train->add_option("--test-frac", test_frac, "test fraction");
    train->add_option("--embedding-mode", embedding_mode,
                      "textcnn: learned_from_vocab|pretrained_frozen");
    train->add_option("--max-len", max_len, "textcnn: sequence length (zero padded)");
    train->add_option("--emb-dim", emb_dim, "textcnn: embedding dimension (learned mode)");
    train->add_option("--max-epochs", max_epochs, "textcnn: epoch cap");
    train->add_option("--patience", patience, "textcnn: early stopping patience");
    train->add_option("--batch-size", batch_size, "textcnn: batch size");
    train->add_option("--dropout", dropout, "textcnn: dropout probability");
    train->add_option("--learning-rate", learning_rate, "textcnn: Adam learning rate");
    train->add_option("--filter-sizes", filter_sizes_csv, "textcnn: sizes, e.g. 3,4,5");
    train->add_option("--filters-per-size", filters_per_size, "textcnn: filters per size");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "render report tables or run CV");
    std::string eval_mode = "split", manifest_path, eval_data, eval_stopwords;
    std::string eval_family, eval_embedding, eval_embedding_id, eval_out_dir = ".";
    long long table_number = 2, eval_seed = 42, cv_k = 10;
    double e_train_frac = 0.6, e_val_frac = 0.2, e_test_frac = 0.2;
    bool eval_no_balance = false;
    evaluate->add_option("--mode", eval_mode, "split|cv");
    evaluate->add_option("--table", table_number, "table shape: 2|3|4|5|6");
    evaluate->add_option("--manifest", manifest_path, "bundles+embeddings manifest JSON");
    evaluate->add_option("--data", eval_data, "labeled dataset JSONL")->required();
    evaluate->add_option("--stopwords", eval_stopwords, "stopword list file");
    evaluate->add_option("--seed", eval_seed, "PRNG seed (drives the split)");
    evaluate->add_option("--out-dir", eval_out_dir, "output directory");
    evaluate->add_flag("--no-balance", eval_no_balance, "skip class balancing");
    evaluate->add_option("--train-frac", e_train_frac, "training fraction");
    evaluate->add_option("--val-frac", e_val_frac, "validation fraction");
    evaluate->add_option("--test-frac", e_test_frac, "test fraction");
    evaluate->add_option("--k", cv_k, "cv: number of folds");
    evaluate->add_option("--family", eval_family, "cv: classifier family");
    evaluate->add_option("--embedding", eval_embedding, "cv: embedding vector file");
    evaluate->add_option("--embedding-id", eval_embedding_id, "cv: embedding identifier");
    long long eval_reduce_dim = 0;
    evaluate->add_option("--reduce-dim", eval_reduce_dim,
                         "cv: PCA-reduce the loaded embedding to this dimensionality");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "label new comments");
    std::vector<std::string> bundle_paths, embedding_specs;
    std::string pred_text, pred_data, pred_stopwords, pred_out;
    predict_cmd->add_option("--bundle", bundle_paths, "model bundle (repeat for an ensemble)");
    predict_cmd->add_option("--ensemble", bundle_paths,
                            "model bundles voting together (alias of repeated --bundle)");
    predict_cmd->add_option("--text", pred_text, "single comment text");
    predict_cmd->add_option("--data", pred_data, "JSONL of comments");
    predict_cmd->add_option("--stopwords", pred_stopwords, "stopword list file");
    predict_cmd->add_option("--embedding", embedding_specs, "embedding as id=path (repeatable)");
    predict_cmd->add_option("--out", pred_out, "output path (stdout when absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        RunConfig file_cfg = load_file_config(config_path);

        if (*ingest) {
            return run_ingest(base_url, project, after, before, status, keywords_file, out_path,
                              force, fixture_dir, user, token, page_size);
        }
        if (*prep) {
            return run_prep(prep_data, prep_stopwords, prep_out);
        }
        if (*train) {
            RunConfig resolved;
            OptBinder bind{train, &file_cfg, &resolved};
            bind.finalize("--family", "family", family);
            bind.finalize("--data", "data", train_data);
            bind.finalize("--stopwords", "stopwords", train_stopwords);
            bind.finalize("--embedding", "embedding_file", embedding_file);
            bind.finalize("--embedding-id", "embedding_id", embedding_id);
            bind.finalize_int("--embedding-dim", "embedding_dim", embedding_dim);
            bind.finalize_int("--reduce-dim", "reduce_dim", reduce_dim);
            bind.finalize_int("--seed", "seed", seed);
            // out_dir stays out of the resolved config so the run id names
            // the computation, not its location
            if (train->count("--out-dir") == 0 && file_cfg.has("out_dir"))
                out_dir = file_cfg.get("out_dir");
            bind.finalize_num("--train-frac", "train_frac", train_frac);
            bind.finalize_num("--val-frac", "val_frac", val_frac);
            bind.finalize_num("--test-frac", "test_frac", test_frac);
            bind.finalize("--embedding-mode", "embedding_mode", embedding_mode);
            bind.finalize_int("--max-len", "max_len", max_len);
            bind.finalize_int("--emb-dim", "emb_dim", emb_dim);
            bind.finalize_int("--max-epochs", "max_epochs", max_epochs);
            bind.finalize_int("--patience", "patience", patience);
            bind.finalize_int("--batch-size", "batch_size", batch_size);
            bind.finalize_num("--dropout", "dropout", dropout);
            bind.finalize_num("--learning-rate", "learning_rate", learning_rate);
            bind.finalize("--filter-sizes", "filter_sizes", filter_sizes_csv);
            bind.finalize_int("--filters-per-size", "filters_per_size", filters_per_size);
            resolved.set("balance", no_balance ? "false" : "true");
            return run_train(resolved, family, train_data, train_stopwords, embedding_file,
                             embedding_id, embedding_dim, reduce_dim, seed, out_dir, !no_balance,
                             train_frac, val_frac, test_frac, embedding_mode, max_len, emb_dim,
                             max_epochs, patience, batch_size, dropout, learning_rate,
                             filter_sizes_csv, filters_per_size);
        }
        if (*evaluate) {
            RunConfig resolved;
            OptBinder bind{evaluate, &file_cfg, &resolved};
            bind.finalize("--mode", "mode", eval_mode);
            bind.finalize_int("--table", "table", table_number);
            bind.finalize("--manifest", "manifest", manifest_path);
            bind.finalize("--data", "data", eval_data);
            bind.finalize("--stopwords", "stopwords", eval_stopwords);
            bind.finalize_int("--seed", "seed", eval_seed);
            if (evaluate->count("--out-dir") == 0 && file_cfg.has("out_dir"))
                eval_out_dir = file_cfg.get("out_dir");
            bind.finalize_num("--train-frac", "train_frac", e_train_frac);
            bind.finalize_num("--val-frac", "val_frac", e_val_frac);
            bind.finalize_num("--test-frac", "test_frac", e_test_frac);
            bind.finalize_int("--k", "k", cv_k);
            bind.finalize("--family", "family", eval_family);
            bind.finalize("--embedding", "embedding_file", eval_embedding);
            bind.finalize("--embedding-id", "embedding_id", eval_embedding_id);
            bind.finalize_int("--reduce-dim", "reduce_dim", eval_reduce_dim);
            resolved.set("balance", eval_no_balance ? "false" : "true");
            return run_evaluate(resolved, eval_mode, table_number, manifest_path, eval_data,
                                eval_stopwords, eval_seed, eval_out_dir, !eval_no_balance,
                                e_train_frac, e_val_frac, e_test_frac, cv_k, eval_family,
                                eval_embedding, eval_embedding_id, eval_reduce_dim);
        }
        if (*predict_cmd) {
            return run_predict(bundle_paths, pred_text, pred_data, pred_stopwords,
                               embedding_specs, pred_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const RefusalError& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return kExitRefusal;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}
