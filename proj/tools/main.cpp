#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cogdiag/dataset.hpp"
#include "cogdiag/dina_em.hpp"
#include "cogdiag/error.hpp"
#include "cogdiag/esve.hpp"
#include "cogdiag/eval.hpp"
#include "cogdiag/hbca.hpp"
#include "cogdiag/io.hpp"
#include "cogdiag/metrics.hpp"
#include "cogdiag/predict.hpp"
#include "cogdiag/synth.hpp"
#include "cogdiag/version.hpp"
#include "manifest.hpp"
#include "options.hpp"

namespace fs = std::filesystem;
using namespace cogdiag;
using cli::ManifestInput;
using cli::OptionRegistry;

namespace {

// ---------------------------------------------------------------------------
// Shared option bundles.
// ---------------------------------------------------------------------------

struct CommonOpts {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out_parent = "runs";
    bool force = false;
    unsigned workers = 1;
};

struct DataOpts {
    std::string responses_path;
    std::string format = "long";
    std::string duplicates = "strict";
    std::string q_path;
};

struct EmOpts {
    int max_iter = 500;
    double tol = 1e-6;
    int restarts = 1;
    int class_limit = 15;
};

struct HbcaOpts {
    double eta = 0.85;
    std::string dims = "5:9";
    int pop = 100;
    int iters = 100;
    int replace = 40;
    double flip_prob = 0.2;
    double leaf_density = 0.35;
    std::size_t da_sample = 100;
    std::string selecting_goal;  // empty = follow the model
    double val_ratio = 0.2;
};

void register_common(OptionRegistry& reg, CLI::App& cmd, CommonOpts& opts) {
    reg.add("--seed", opts.seed, "random seed for the whole run");
    reg.add("--workers", opts.workers, "worker threads (same results for any count)");
    // Invocation controls, not computation config: no JSON counterpart and
    // absent from the manifest, which stays invariant to output placement.
    cmd.add_option("--config", opts.config_path, "JSON config; CLI flags take precedence");
    cmd.add_option("--out", opts.out_parent, "parent directory for the run directory");
    cmd.add_flag("--force", opts.force, "overwrite an existing run directory");
}

void register_data(OptionRegistry& reg, DataOpts& opts, bool with_q) {
    reg.add("--responses", opts.responses_path, "responses CSV path");
    reg.add("--format", opts.format, "responses format: long|wide");
    reg.add("--duplicates", opts.duplicates, "duplicate policy: strict|lenient");
    if (with_q) reg.add("--q", opts.q_path, "expert Q-matrix CSV path");
}

void register_em(OptionRegistry& reg, EmOpts& opts) {
    reg.add("--em-max-iter", opts.max_iter, "EM iteration cap");
    reg.add("--em-tol", opts.tol, "EM log-likelihood tolerance");
    reg.add("--em-restarts", opts.restarts, "EM restarts (>1 perturbs initial rates)");
    reg.add("--em-class-limit", opts.class_limit, "largest K enumerated as 2^K classes");
}

void register_hbca(OptionRegistry& reg, HbcaOpts& opts) {
    reg.add("--eta", opts.eta, "covering-relation threshold");
    reg.add("--dims", opts.dims, "dim_qv range lo:hi (or a single value)");
    reg.add("--pop", opts.pop, "population size");
    reg.add("--iters", opts.iters, "calibration iterations (0 = pure QST)");
    reg.add("--replace", opts.replace, "candidates replaced on stagnation");
    reg.add("--flip-prob", opts.flip_prob, "zero-bit flip probability in QST");
    reg.add("--leaf-density", opts.leaf_density, "Bernoulli density of QST leaf rows");
    reg.add("--da-sample", opts.da_sample, "profiles sampled per side in DA");
    reg.add("--selecting-goal", opts.selecting_goal, "validation goal: si|sd|em");
    reg.add("--val-ratio", opts.val_ratio, "validation share of the training set");
}

ResponseFormat parse_format(const std::string& name) {
    if (name == "long") return ResponseFormat::CsvLong;
    if (name == "wide") return ResponseFormat::CsvWide;
    throw ConfigError("unknown format '" + name + "' (expected long or wide)");
}

DuplicatePolicy parse_duplicates(const std::string& name) {
    if (name == "strict") return DuplicatePolicy::Strict;
    if (name == "lenient") return DuplicatePolicy::Lenient;
    throw ConfigError("unknown duplicate policy '" + name + "' (expected strict or lenient)");
}

SelectingGoal parse_goal(const std::string& name, ModelKind model) {
    if (name.empty()) {
        // The paper pairs DINA with the SI goal; ESVE models select by their
        // own prediction method.
        return model == ModelKind::EsveSd ? SelectingGoal::Sd : SelectingGoal::Si;
    }
    if (name == "si") return SelectingGoal::Si;
    if (name == "sd") return SelectingGoal::Sd;
    if (name == "em") return SelectingGoal::Em;
    throw ConfigError("unknown selecting goal '" + name + "' (expected si, sd or em)");
}

std::pair<int, int> parse_dims(const std::string& text) {
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            const int d = std::stoi(text);
            return {d, d};
        }
        return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError("cannot parse dim range '" + text + "' (expected lo:hi)");
    }
}

EmConfig em_config_from(const EmOpts& opts, unsigned workers) {
    EmConfig config;
    config.max_iter = opts.max_iter;
    config.tol = opts.tol;
    config.restarts = opts.restarts;
    config.class_limit = opts.class_limit;
    config.workers = workers;
    return config;
}

HbcaConfig hbca_config_from(const HbcaOpts& opts, ModelKind model, const EmOpts& em,
                            unsigned workers, double smoothing) {
    HbcaConfig config;
    config.eta = opts.eta;
    std::tie(config.dim_lo, config.dim_hi) = parse_dims(opts.dims);
    config.population_size = opts.pop;
    config.iterations = opts.iters;
    config.replace_count = opts.replace;
    config.flip_prob = opts.flip_prob;
    config.leaf_density = opts.leaf_density;
    config.da_sample_size = opts.da_sample;
    config.selecting_goal = parse_goal(opts.selecting_goal, model);
    config.validation_ratio = opts.val_ratio;
    config.em = em_config_from(em, 1);
    config.workers = workers;
    config.smoothing = smoothing;
    return config;
}

ResponseMatrix load_data(const DataOpts& opts, std::vector<ManifestInput>& inputs) {
    if (opts.responses_path.empty()) throw ConfigError("--responses is required");
    const ResponseMatrix responses = load_responses(opts.responses_path, parse_format(opts.format),
                                                    parse_duplicates(opts.duplicates));
    inputs.push_back({"responses", opts.responses_path});
    return responses;
}

QMatrix load_aligned_q(const DataOpts& opts, const ResponseMatrix& responses,
                       std::vector<ManifestInput>& inputs) {
    if (opts.q_path.empty()) throw ConfigError("this model requires --q <expert Q-matrix CSV>");
    const QMatrix q = align_qmatrix(load_qmatrix(opts.q_path), responses);
    inputs.push_back({"qmatrix", opts.q_path});
    return q;
}

std::vector<CellRef> parse_cells_csv(const fs::path& path, const ResponseMatrix& responses) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open " + path.string());
    std::unordered_map<std::string, std::uint32_t> students, questions;
    for (std::uint32_t i = 0; i < responses.student_count(); ++i)
        students.emplace(responses.student_ids()[i], i);
    for (std::uint32_t j = 0; j < responses.question_count(); ++j)
        questions.emplace(responses.question_ids()[j], j);

    std::vector<CellRef> cells;
    std::string line;
    std::size_t number = 0;
    while (std::getline(file, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (number == 1 && line == "student_id,question_id")) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("expected student_id,question_id", number);
        const auto student = students.find(line.substr(0, comma));
        const auto question = questions.find(line.substr(comma + 1));
        if (student == students.end() || question == questions.end())
            throw ValidationError("unknown student or question id (line " + std::to_string(number) + ")");
        cells.push_back({student->second, question->second});
    }
    if (cells.empty()) throw ValidationError("cell list " + path.string() + " is empty");
    return cells;
}

nlohmann::json load_config_file(const std::string& path, std::vector<ManifestInput>& inputs) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open config " + path);
    nlohmann::json config;
    try {
        file >> config;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config must be a JSON object");
    inputs.push_back({"config", path});
    return config;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the list of output file names it wrote.
// ---------------------------------------------------------------------------

struct RunContext {
    fs::path run_dir;
    std::vector<ManifestInput> inputs;
    std::vector<std::string> outputs;

    void emit(const std::string& name, const std::string& content) {
        cli::write_output(run_dir, name, content);
        outputs.push_back(name);
    }
};

struct TrainCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "esve-sd";
    double test_ratio = 0.0;
    double smoothing = 0.0;
    EmOpts em;

    void execute(RunContext& ctx) {
        const ModelKind kind = parse_model(model);
        const ResponseMatrix responses = load_data(data, ctx.inputs);
        const QMatrix q = load_aligned_q(data, responses, ctx.inputs);

        std::vector<CellRef> train = responses.observed_cells();
        if (test_ratio > 0) {
            const DataSplit ds = split(responses, test_ratio, 0.0, RandomSource(common.seed).derive(0));
            for (const auto& warning : ds.warnings) std::cerr << "warning: " << warning << '\n';
            train = ds.train;
        }

        RandomSource rng = RandomSource(common.seed).derive(2);
        if (kind == ModelKind::DinaEm) {
            const EmState state =
                em_fit(responses, q, train, em_config_from(em, common.workers), rng.derive(0));
            if (state.factorized)
                std::cerr << "note: unit-row Q-matrix detected, using the factorized EM path\n";
            ctx.emit("em_state.json", em_state_json(state, q));
            const auto profiles = em_map_profiles(state, responses, q, train, common.workers);
            ctx.emit("profiles.csv", profiles_csv(profiles, responses, q.skill_ids));
        } else {
            const auto results = esve_solve_all(responses, q, train, rng.derive(0), common.workers);
            const SlipGuessTable table = kind == ModelKind::EsveSd
                                             ? estimate_sd(results, responses, q, train, smoothing)
                                             : estimate_si(results, responses, q, train, smoothing);
            ctx.emit("profiles.csv", profiles_csv(results, responses, q));
            ctx.emit("profiles.json", profiles_json(results, responses, q));
            ctx.emit("table.json", slip_guess_table_json(table, q));
        }
    }
};

struct PredictCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "esve-sd";
    double test_ratio = 0.0;
    std::string cells_path;
    double smoothing = 0.0;
    EmOpts em;

    void execute(RunContext& ctx) {
        const ModelKind kind = parse_model(model);
        const ResponseMatrix responses = load_data(data, ctx.inputs);
        const QMatrix q = load_aligned_q(data, responses, ctx.inputs);
        if ((test_ratio > 0) == !cells_path.empty())
            throw ConfigError("predict needs exactly one of --test-ratio or --cells");

        std::vector<CellRef> train, targets;
        if (test_ratio > 0) {
            const DataSplit ds = split(responses, test_ratio, 0.0, RandomSource(common.seed).derive(0));
            for (const auto& warning : ds.warnings) std::cerr << "warning: " << warning << '\n';
            train = ds.train;
            targets = ds.test;
        } else {
            train = responses.observed_cells();
            targets = parse_cells_csv(cells_path, responses);
            ctx.inputs.push_back({"cells", cells_path});
        }

        const FittedModel fitted = fit_model(kind, responses, q, train, RandomSource(common.seed).derive(2),
                                             common.workers, smoothing, em_config_from(em, common.workers));
        const PredictionBatch batch = model_predict(fitted, responses, q, train, targets, common.workers);
        if (batch.fallback_count > 0)
            std::cerr << "warning: " << batch.fallback_count
                      << " prediction(s) used the question-mean fallback\n";
        ctx.emit("predictions.csv", predictions_csv(batch, responses, targets));
    }
};

struct EvalCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "esve-sd";
    std::string q_source = "file";
    double test_ratio = 0.2;
    int repeat = 5;
    double smoothing = 0.0;
    bool consistency = false;
    EmOpts em;
    HbcaOpts hbca;

    void execute(RunContext& ctx) {
        ExperimentConfig config;
        config.model = parse_model(model);
        config.q_source = parse_q_source(q_source);
        config.test_ratio = test_ratio;
        config.validation_ratio = hbca.val_ratio;
        config.repeat = repeat;
        config.seed = common.seed;
        config.workers = common.workers;
        config.smoothing = smoothing;
        config.consistency = consistency;
        config.em = em_config_from(em, 1);
        config.hbca = hbca_config_from(hbca, config.model, em, 1, smoothing);
        // Candidate-level parallelism for HBCA, student-level otherwise.
        config.hbca.workers = common.workers;

        const ResponseMatrix responses = load_data(data, ctx.inputs);
        std::optional<QMatrix> q;
        if (config.q_source == QSourceKind::File)
            q = load_aligned_q(data, responses, ctx.inputs);

        const ExperimentReport report = run_experiment(responses, q, config);
        ctx.emit("report.json", experiment_report_json(report));
        ctx.emit("report.txt", experiment_report_table(report));
        std::cout << experiment_report_table(report);
        if (report.reference) {
            ctx.emit("heatmap_slip.csv", heatmap_csv(report.reference->s_ref, report.labeled_q
                                                         ? *report.labeled_q
                                                         : *q, "level"));
            ctx.emit("heatmap_guess.csv", heatmap_csv(report.reference->g_ref, report.labeled_q
                                                          ? *report.labeled_q
                                                          : *q, "deficiency"));
        }
        if (report.labeled_q) {
            save_qmatrix(*report.labeled_q, ctx.run_dir / "labeled_q.csv");
            ctx.outputs.push_back("labeled_q.csv");
        }
    }
};

struct LabelQCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "esve-sd";  // defines the default selecting goal
    double smoothing = 0.0;
    EmOpts em;
    HbcaOpts hbca;

    void execute(RunContext& ctx) {
        const ResponseMatrix responses = load_data(data, ctx.inputs);
        const HbcaConfig config =
            hbca_config_from(hbca, parse_model(model), em, common.workers, smoothing);

        DataSplit ds;
        ds.train = responses.observed_cells();  // validation carved inside
        const HbcaResult result = hbca_run(responses, ds, config, RandomSource(common.seed).derive(1));

        save_qmatrix(result.best.q, ctx.run_dir / "qmatrix.csv");
        ctx.outputs.push_back("qmatrix.csv");
        ctx.emit("hbca_report.jsonl", hbca_report_jsonl(result));
        std::cout << "best dim_qv " << result.best_dim << ", validation MAE "
                  << result.best.validation_mae << "\n";
    }
};

struct ConsistencyCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "dina-em";
    std::string q_source = "file";
    double test_ratio = 0.2;
    double smoothing = 0.0;
    EmOpts em;
    HbcaOpts hbca;

    void execute(RunContext& ctx) {
        ExperimentConfig config;
        config.model = parse_model(model);
        config.q_source = parse_q_source(q_source);
        config.test_ratio = test_ratio;
        config.validation_ratio = hbca.val_ratio;
        config.repeat = 1;
        config.seed = common.seed;
        config.workers = common.workers;
        config.smoothing = smoothing;
        config.consistency = true;
        config.em = em_config_from(em, 1);
        config.hbca = hbca_config_from(hbca, config.model, em, 1, smoothing);
        config.hbca.workers = common.workers;

        const ResponseMatrix responses = load_data(data, ctx.inputs);
        std::optional<QMatrix> q;
        if (config.q_source == QSourceKind::File)
            q = load_aligned_q(data, responses, ctx.inputs);

        const ExperimentReport report = run_experiment(responses, q, config);
        const QMatrix& used_q = report.labeled_q ? *report.labeled_q : *q;
        ctx.emit("heatmap_slip.csv", heatmap_csv(report.reference->s_ref, used_q, "level"));
        ctx.emit("heatmap_guess.csv", heatmap_csv(report.reference->g_ref, used_q, "deficiency"));

        const auto& dist = *report.trials.front().distortion;
        nlohmann::json doc;
        doc["model"] = report.model;
        doc["q_source"] = report.q_source;
        doc["metrics"] = {{"mae", report.mean_mae}, {"rmse", report.mean_rmse}};
        auto side = [](const std::optional<DistortionValue>& v) -> nlohmann::json {
            if (!v) return nullptr;
            return {{"defined_mean", v->defined_mean},
                    {"full_grid_mean", v->full_grid_mean},
                    {"defined_buckets", v->defined_buckets},
                    {"total_buckets", v->total_buckets}};
        };
        doc["s_delta"] = side(dist.s_delta);
        doc["g_delta"] = side(dist.g_delta);
        ctx.emit("consistency.json", doc.dump(2) + "\n");

        char line[160];
        std::string text;
        std::snprintf(line, sizeof(line), "%-10s %10s %10s\n", "model", "s_delta", "g_delta");
        text += line;
        std::snprintf(line, sizeof(line), "%-10s %10.4f %10.4f\n", report.model.c_str(),
                      dist.s_delta ? dist.s_delta->defined_mean : 0.0,
                      dist.g_delta ? dist.g_delta->defined_mean : 0.0);
        text += line;
        ctx.emit("consistency.txt", text);
        std::cout << text;
    }
};

struct SynthCmd {
    CommonOpts common;
    std::size_t students = 100;
    std::size_t questions = 20;
    std::size_t skills = 4;
    double q_density = 0.3;
    double profile_density = 0.5;
    double slip = 0.1;
    double slip_per_level = 0.0;
    double slip_cap = 1.0;
    double guess = 0.1;
    double guess_per_deficiency = 0.0;
    double guess_cap = 1.0;
    double mask_rate = 0.0;
    std::string format = "long";

    void execute(RunContext& ctx) {
        GenerativeSpec spec;
        spec.students = students;
        spec.questions = questions;
        spec.skills = skills;
        spec.q_density = q_density;
        spec.profile_density = profile_density;
        spec.slip = {slip, slip_per_level, slip_cap};
        spec.guess = {guess, guess_per_deficiency, guess_cap};
        spec.mask_rate = mask_rate;
        spec.seed = common.seed;

        const GeneratedData data = generate(spec);
        save_responses(data.responses, ctx.run_dir / "responses.csv", parse_format(format));
        ctx.outputs.push_back("responses.csv");
        save_qmatrix(data.q, ctx.run_dir / "qmatrix.csv");
        ctx.outputs.push_back("qmatrix.csv");
        std::vector<std::optional<SkillProfile>> profiles(data.profiles.begin(), data.profiles.end());
        ctx.emit("profiles.csv", profiles_csv(profiles, data.responses, data.q.skill_ids));
        ctx.emit("truth.json", truth_json(data, spec));
    }
};

struct SweepCmd {
    CommonOpts common;
    DataOpts data;
    std::string model = "esve-sd";
    double test_ratio = 0.2;
    double smoothing = 0.0;
    EmOpts em;
    HbcaOpts hbca;

    void execute(RunContext& ctx) {
        const ModelKind kind = parse_model(model);
        const ResponseMatrix responses = load_data(data, ctx.inputs);
        const DataSplit ds =
            split(responses, test_ratio, hbca.val_ratio, RandomSource(common.seed).derive(0));
        for (const auto& warning : ds.warnings) std::cerr << "warning: " << warning << '\n';

        const HbcaConfig config = hbca_config_from(hbca, kind, em, common.workers, smoothing);
        const HbcaResult result = hbca_run(responses, ds, config, RandomSource(common.seed).derive(1));

        const auto fit_cells = merge_cells(ds.train, ds.validation);
        const auto truth = observed_truth(responses, ds.test);
        auto test_mae = [&](const QMatrix& q) {
            const FittedModel fitted =
                fit_model(kind, responses, q, fit_cells, RandomSource(common.seed).derive(2),
                          common.workers, smoothing, em_config_from(em, common.workers));
            const PredictionBatch batch =
                model_predict(fitted, responses, q, fit_cells, ds.test, common.workers);
            return mae(batch.probability, truth);
        };

        std::string csv = "dim,qst_val_mae,qst_test_mae,hbca_val_mae,hbca_test_mae\n";
        for (const auto& dim : result.dims) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", dim.dim,
                          dim.best_qst.validation_mae, test_mae(dim.best_qst.q),
                          dim.best.validation_mae, test_mae(dim.best.q));
            csv += line;
        }
        ctx.emit("sweep.csv", csv);
        ctx.emit("sweep.jsonl", hbca_report_jsonl(result));
        std::cout << csv;
    }
};

// ---------------------------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"cogdiag: cognitive diagnosis toolkit (ESVE-DINA, DINA-EM, HBCA)"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    TrainCmd train;
    CLI::App* train_cmd = app.add_subcommand("train", "fit a model and export its parameters");
    OptionRegistry train_reg(*train_cmd);
    register_common(train_reg, *train_cmd, train.common);
    register_data(train_reg, train.data, true);
    train_reg.add("--model", train.model, "dina-em|esve-si|esve-sd");
    train_reg.add("--test-ratio", train.test_ratio, "hold out this share of cells (0 = train on all)");
    train_reg.add("--smoothing", train.smoothing, "additive smoothing toward the back-off rate");
    register_em(train_reg, train.em);

    PredictCmd predict;
    CLI::App* predict_cmd = app.add_subcommand("predict", "fit and predict held-out or listed cells");
    OptionRegistry predict_reg(*predict_cmd);
    register_common(predict_reg, *predict_cmd, predict.common);
    register_data(predict_reg, predict.data, true);
    predict_reg.add("--model", predict.model, "dina-em|esve-si|esve-sd");
    predict_reg.add("--test-ratio", predict.test_ratio, "hold out and predict this share of cells");
    predict_reg.add("--cells", predict.cells_path, "CSV of student_id,question_id targets");
    predict_reg.add("--smoothing", predict.smoothing, "additive smoothing toward the back-off rate");
    register_em(predict_reg, predict.em);

    EvalCmd eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "repeated PEP trials with mean metrics");
    OptionRegistry eval_reg(*eval_cmd);
    register_common(eval_reg, *eval_cmd, eval.common);
    register_data(eval_reg, eval.data, true);
    eval_reg.add("--model", eval.model, "dina-em|esve-si|esve-sd");
    eval_reg.add("--q-source", eval.q_source, "file|qst|hbca");
    eval_reg.add("--test-ratio", eval.test_ratio, "test share of observed cells");
    eval_reg.add("--repeat", eval.repeat, "number of seeded trials");
    eval_reg.add("--smoothing", eval.smoothing, "additive smoothing toward the back-off rate");
    eval_reg.add_flag("--consistency", eval.consistency, "also compute reference rates and distortion");
    register_em(eval_reg, eval.em);
    register_hbca(eval_reg, eval.hbca);

    LabelQCmd label_q;
    CLI::App* label_cmd = app.add_subcommand("label-q", "label a Q-matrix unsupervised via HBCA");
    OptionRegistry label_reg(*label_cmd);
    register_common(label_reg, *label_cmd, label_q.common);
    register_data(label_reg, label_q.data, false);
    label_reg.add("--model", label_q.model, "model whose goal guides selection");
    label_reg.add("--smoothing", label_q.smoothing, "additive smoothing toward the back-off rate");
    register_em(label_reg, label_q.em);
    register_hbca(label_reg, label_q.hbca);

    ConsistencyCmd consistency;
    CLI::App* cons_cmd = app.add_subcommand("consistency", "reference slip/guess rates and distortion");
    OptionRegistry cons_reg(*cons_cmd);
    register_common(cons_reg, *cons_cmd, consistency.common);
    register_data(cons_reg, consistency.data, true);
    cons_reg.add("--model", consistency.model, "dina-em|esve-si|esve-sd");
    cons_reg.add("--q-source", consistency.q_source, "file|qst|hbca");
    cons_reg.add("--test-ratio", consistency.test_ratio, "test share of observed cells");
    cons_reg.add("--smoothing", consistency.smoothing, "additive smoothing toward the back-off rate");
    register_em(cons_reg, consistency.em);
    register_hbca(cons_reg, consistency.hbca);

    SynthCmd synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate ground-truth synthetic data");
    OptionRegistry synth_reg(*synth_cmd);
    register_common(synth_reg, *synth_cmd, synth.common);
    synth_reg.add("--students", synth.students, "student count");
    synth_reg.add("--questions", synth.questions, "question count");
    synth_reg.add("--skills", synth.skills, "skill count");
    synth_reg.add("--q-density", synth.q_density, "Bernoulli density of Q rows");
    synth_reg.add("--profile-density", synth.profile_density, "Bernoulli density of profiles");
    synth_reg.add("--s", synth.slip, "slip base rate");
    synth_reg.add("--s-per-level", synth.slip_per_level, "slip increase per mastered skill");
    synth_reg.add("--s-cap", synth.slip_cap, "slip clamp");
    synth_reg.add("--g", synth.guess, "guess base rate");
    synth_reg.add("--g-per-deficiency", synth.guess_per_deficiency, "guess change per lacking skill");
    synth_reg.add("--g-cap", synth.guess_cap, "guess clamp");
    synth_reg.add("--mask-rate", synth.mask_rate, "share of cells hidden as unobserved");
    synth_reg.add("--format", synth.format, "responses format: long|wide");

    SweepCmd sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "per-dim QST/HBCA validation and test MAE");
    OptionRegistry sweep_reg(*sweep_cmd);
    register_common(sweep_reg, *sweep_cmd, sweep.common);
    register_data(sweep_reg, sweep.data, false);
    sweep_reg.add("--model", sweep.model, "dina-em|esve-si|esve-sd");
    sweep_reg.add("--test-ratio", sweep.test_ratio, "test share of observed cells");
    sweep_reg.add("--smoothing", sweep.smoothing, "additive smoothing toward the back-off rate");
    register_em(sweep_reg, sweep.em);
    register_hbca(sweep_reg, sweep.hbca);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse message
        return code == 0 ? 0 : 1;
    }

    struct Active {
        std::string name;
        CommonOpts* common;
        OptionRegistry* registry;
        std::function<void(RunContext&)> run;
    };
    Active active;
    if (train_cmd->parsed())
        active = {"train", &train.common, &train_reg, [&](RunContext& c) { train.execute(c); }};
    else if (predict_cmd->parsed())
        active = {"predict", &predict.common, &predict_reg, [&](RunContext& c) { predict.execute(c); }};
    else if (eval_cmd->parsed())
        active = {"eval", &eval.common, &eval_reg, [&](RunContext& c) { eval.execute(c); }};
    else if (label_cmd->parsed())
        active = {"label-q", &label_q.common, &label_reg, [&](RunContext& c) { label_q.execute(c); }};
    else if (cons_cmd->parsed())
        active = {"consistency", &consistency.common, &cons_reg,
                  [&](RunContext& c) { consistency.execute(c); }};
    else if (synth_cmd->parsed())
        active = {"synth", &synth.common, &synth_reg, [&](RunContext& c) { synth.execute(c); }};
    else
        active = {"sweep", &sweep.common, &sweep_reg, [&](RunContext& c) { sweep.execute(c); }};

    const auto started = std::chrono::steady_clock::now();
    RunContext ctx;
    const nlohmann::json file_config = load_config_file(active.common->config_path, ctx.inputs);
    nlohmann::json resolved, sources;
    active.registry->resolve(file_config, resolved, sources);

    ctx.run_dir = cli::make_run_directory(active.common->out_parent, active.name,
                                          active.common->seed, active.common->force);
    active.run(ctx);

    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    cli::write_manifest(ctx.run_dir, active.name, active.common->seed, resolved, sources,
                        ctx.inputs, ctx.outputs, duration);
    std::cerr << "outputs written to " << ctx.run_dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
