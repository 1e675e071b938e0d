#include "uapforge/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <random>

#include "uapforge/attacks.hpp"
#include "uapforge/data.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/eval.hpp"
#include "uapforge/model.hpp"
#include "uapforge/seed.hpp"
#include "uapforge/train.hpp"

namespace uapforge::cli {

namespace {

// Options every data-consuming command shares: which file, and how it is split.
struct SplitFlags {
    std::string data;
    std::string split = "loso";
    int test_subject = -1;  // -1: the highest subject id
    int fold = 0;
    std::uint64_t split_seed = 0;
};

struct GenDataFlags {
    SynthConfig synth;
    std::string normalize = "none";
    std::string out;
};

struct TrainFlags {
    SplitFlags split;
    std::string model = "small-cnn";
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t patience = 10;
    std::string class_weights = "inverse";
    std::uint64_t seed = 0;
    std::string out;
};

struct AttackFlags {
    std::string method = "tlm";
    std::string target = "none";
    std::string mode = "full";
    std::string mini_shape;
    std::string constraint = "none";
    double alpha = 0.0;
    double xi = 0.2;
    double xi_scale = 0.0;  // > 0: xi = xi_scale * training-set std
    std::string norm = "inf";
    double delta = 1.0;
    std::size_t max_iter = 500;
    std::size_t batch_size = 32;
    double lr = 0.01;
    std::size_t patience = 10;
    std::string labels = "predicted";
    std::size_t placements = 30;
    std::uint64_t seed = 0;
};

struct CraftFlags {
    SplitFlags split;
    AttackFlags attack;
    std::string model;
    std::string out;
    std::string csv;
};

struct EvalFlags {
    SplitFlags split;
    std::string model;
    std::vector<std::string> uaps;
    std::string baseline = "none";
    double xi = 0.2;
    std::string target = "none";
    std::size_t placements = 30;
    std::string on = "test";
    std::uint64_t seed = 0;
    std::string out;
};

struct SweepFlags {
    SplitFlags split;
    AttackFlags attack;
    std::string victim = "small-cnn";
    std::size_t epochs = 200;
    std::string param = "xi";
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::string out;
};

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void add_split_flags(CLI::App* cmd, SplitFlags& f) {
    cmd->add_option("--data", f.data, "Trial file (.eegb)")->check(CLI::ExistingFile);
    cmd->add_option("--split", f.split, "loso or within")
        ->check(CLI::IsMember({"loso", "within"}))
        ->capture_default_str();
    cmd->add_option("--test-subject", f.test_subject, "LOSO held-out subject (default: highest id)");
    cmd->add_option("--fold", f.fold, "Within-subject fold in [0, 5)")->capture_default_str();
    cmd->add_option("--split-seed", f.split_seed, "Seed of the LOSO train/validation shuffle")
        ->capture_default_str();
}

void add_attack_flags(CLI::App* cmd, AttackFlags& f) {
    cmd->add_option("--method", f.method, "df or tlm")->check(CLI::IsMember({"df", "tlm"}))->capture_default_str();
    cmd->add_option("--target", f.target, "Target class index, or none")->capture_default_str();
    cmd->add_option("--mode", f.mode, "full, channel-invariant or mini")
        ->check(CLI::IsMember({"full", "channel-invariant", "mini"}))
        ->capture_default_str();
    cmd->add_option("--mini-shape", f.mini_shape, "Mini template size as CxT");
    cmd->add_option("--constraint", f.constraint, "none, l1 or l2")
        ->check(CLI::IsMember({"none", "l1", "l2"}))
        ->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Constraint weight")->capture_default_str();
    cmd->add_option("--xi", f.xi, "Perturbation bound")->capture_default_str();
    cmd->add_option("--xi-scale", f.xi_scale, "Bound relative to the training-set std (overrides --xi)");
    cmd->add_option("--norm", f.norm, "inf or 2")->check(CLI::IsMember({"inf", "2"}))->capture_default_str();
    cmd->add_option("--delta", f.delta, "Desired success rate (df default 0.8)")->capture_default_str();
    cmd->add_option("--max-iter", f.max_iter, "Passes over the data (df default 10)")->capture_default_str();
    cmd->add_option("--batch-size", f.batch_size, "TLM mini-batch size")->capture_default_str();
    cmd->add_option("--lr", f.lr, "TLM Adam step size")->capture_default_str();
    cmd->add_option("--patience", f.patience, "TLM epochs without improvement")->capture_default_str();
    cmd->add_option("--labels", f.labels, "predicted or true")
        ->check(CLI::IsMember({"predicted", "true"}))
        ->capture_default_str();
    cmd->add_option("--placements", f.placements, "Mini validation placements per trial")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Crafting seed")->capture_default_str();
}

std::optional<int> parse_target(const std::string& text) {
    if (text == "none" || text.empty()) return std::nullopt;
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || value < 0) throw UsageError("--target must be a class index or 'none', got '" + text + "'");
    return value;
}

std::pair<std::size_t, std::size_t> parse_shape(const std::string& text) {
    const auto x = text.find_first_of("xX");
    try {
        if (x != std::string::npos) {
            std::size_t a = 0, b = 0;
            const auto c = std::stoul(text.substr(0, x), &a);
            const auto t = std::stoul(text.substr(x + 1), &b);
            if (a == x && b == text.size() - x - 1 && c > 0 && t > 0) return {c, t};
        }
    } catch (const std::exception&) {
    }
    throw UsageError("--mini-shape must look like CxT with positive sizes, got '" + text + "'");
}

Split make_split(const TrialSet& set, const SplitFlags& f) {
    if (f.split == "within") return within_subject_fold(set, within_subject_blocks(set), f.fold);
    int subject = f.test_subject;
    if (subject < 0) {
        const auto ids = subject_ids(set);
        if (ids.empty()) throw ValueError("data file holds no trials");
        subject = ids.back();
    }
    return loso_split(set, subject, f.split_seed);
}

const TrialSet& pick(const Split& split, const std::string& which) {
    if (which == "train") return split.train;
    if (which == "val") return split.val;
    return split.test;
}

void check_model_input(const ModelParams& model, const TrialSet& set) {
    if (set.channels() != model.spec.input_channels || set.samples() != model.spec.input_samples)
        throw ShapeError("model expects " + std::to_string(model.spec.input_channels) + "x" +
                         std::to_string(model.spec.input_samples) + " trials, data has " +
                         std::to_string(set.channels()) + "x" + std::to_string(set.samples()));
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

// Builds the crafting configuration; method-specific defaults apply to every
// flag the user did not set.
AttackConfig attack_config(const AttackFlags& f, const CLI::App* cmd, std::size_t num_classes, double train_std) {
    const bool df = f.method == "df";
    AttackConfig cfg = df ? AttackConfig::df_defaults() : AttackConfig::tlm_defaults();
    const auto target = parse_target(f.target);
    if (df && target) throw UsageError("--method df supports non-target attacks only; drop --target");
    if (df && f.mode != "full") throw UsageError("--method df crafts full UAPs only");
    cfg.xi = f.xi_scale > 0.0 ? f.xi_scale * train_std : f.xi;
    cfg.norm = f.norm == "2" ? NormOrder::L2 : NormOrder::Linf;
    if (cmd->count("--delta")) cfg.delta = f.delta;
    if (cmd->count("--max-iter")) cfg.max_iter = f.max_iter;
    cfg.alpha = f.alpha;
    cfg.constraint = f.constraint == "l1" ? ConstraintKind::L1 : f.constraint == "l2" ? ConstraintKind::L2
                                                                                       : ConstraintKind::None;
    cfg.batch_size = f.batch_size;
    cfg.learning_rate = f.lr;
    cfg.patience = f.patience;
    cfg.label_source = f.labels == "true" ? LabelSource::True : LabelSource::Predicted;
    cfg.validation_placements = f.placements;
    cfg.seed = f.seed;
    if (target) {
        cfg.kind = AttackKind::Target;
        cfg.target_class = *target;
    }
    cfg.validate(num_classes);
    return cfg;
}

AttackResult craft_with(const ModelParams& model, const Split& split, const AttackFlags& f, const AttackConfig& cfg) {
    if (f.method == "df") return df_uap(model, split.train, cfg);
    if (f.mode == "mini") {
        if (f.mini_shape.empty()) throw UsageError("--mode mini needs --mini-shape CxT");
        const auto [c, t] = parse_shape(f.mini_shape);
        return craft_mini_uap(model, split.train, split.val, cfg, c, t);
    }
    return tlm_uap(model, split.train, split.val, cfg,
                   f.mode == "channel-invariant" ? UapMode::ChannelInvariant : UapMode::Full);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
    require(f.out, "--out");
    f.synth.validate();
    TrialSet set = gen_synthetic(f.synth);
    if (f.normalize == "zscore")
        set = normalize(set, Normalization::zscore());
    else if (f.normalize == "mean-shift-clip")
        set = normalize(set, Normalization::mean_shift_clip());
    else if (f.normalize == "ema")
        set = normalize(set, Normalization::ema());
    std::filesystem::create_directories(f.out);
    const auto path = std::filesystem::path(f.out) / "trials.eegb";
    write_trials(set, path);
    out << "wrote " << path.string() << ": n=" << set.size() << " C=" << set.channels() << " T=" << set.samples()
        << " K=" << set.num_classes() << '\n';
    return kExitOk;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
    require(f.split.data, "--data");
    require(f.out, "--out");
    const TrialSet set = read_trials(f.split.data);
    const Split split = make_split(set, f.split);
    const auto kind = model_kind_from_string(f.model);
    const auto spec = kind == ModelKind::Affine ? ModelSpec::affine(set.channels(), set.samples(), set.num_classes())
                                                : ModelSpec::small_cnn(set.channels(), set.samples(), set.num_classes());
    TrainConfig cfg;
    cfg.adam.learning_rate = f.lr;
    cfg.max_epochs = f.epochs;
    cfg.batch_size = f.batch_size;
    cfg.patience = f.patience;
    cfg.seed = f.seed;
    cfg.class_weighting = f.class_weights == "uniform" ? ClassWeighting::Uniform : ClassWeighting::Inverse;
    cfg.validate();
    const auto fit = fit_victim(spec, split.train, split.val, cfg);
    save_model(fit.params, f.out);
    const auto val = evaluate_clean(fit.params, split.val);
    out << "epochs " << fit.report.epochs_run << (fit.report.stopped_early ? " (early stop)" : "") << '\n';
    out << "validation rca=" << fixed(val.rca) << " bca=" << fixed(val.bca) << '\n';
    if (!split.test.empty()) {
        const auto test = evaluate_clean(fit.params, split.test);
        out << "test rca=" << fixed(test.rca) << " bca=" << fixed(test.bca) << '\n';
    }
    return kExitOk;
}

int cmd_craft(const CraftFlags& f, const CLI::App* cmd, std::ostream& out) {
    require(f.model, "--model");
    require(f.split.data, "--data");
    require(f.out, "--out");
    const auto model = load_model(f.model);
    const TrialSet set = read_trials(f.split.data);
    check_model_input(model, set);
    const Split split = make_split(set, f.split);
    const auto cfg = attack_config(f.attack, cmd, model.spec.num_classes, entry_stddev(split.train));
    const auto result = craft_with(model, split, f.attack, cfg);
    write_uap(result.uap, f.out);
    if (!f.csv.empty()) export_uap_csv(result.uap, f.csv);

    const bool target = cfg.kind == AttackKind::Target;
    const bool mini = result.uap.mode == UapMode::Mini;
    const auto policy = mini ? PlacementPolicy::random(f.attack.placements, derive_seed(f.attack.seed, 9))
                             : PlacementPolicy::at({});
    const char* metric = target ? "target_rate" : "asr";
    out << "xi " << fixed(cfg.xi, 6) << ", iterations " << result.iterations_run << '\n';
    if (f.attack.method == "df")
        out << "training " << metric << "=" << fixed(result.best_validation_asr) << '\n';
    else
        out << "validation " << metric << "=" << fixed(result.best_validation_asr) << '\n';
    if (!split.test.empty()) {
        const auto report = evaluate_uap(model, split.test, result.uap, policy,
                                         target ? std::optional<int>(cfg.target_class) : std::nullopt);
        out << "test " << metric << "=" << fixed(target ? *report.target_rate : report.asr)
            << " rca=" << fixed(report.rca) << '\n';
    }
    return kExitOk;
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
    require(f.model, "--model");
    require(f.split.data, "--data");
    require(f.out, "--out");
    const auto model = load_model(f.model);
    const TrialSet all = read_trials(f.split.data);
    check_model_input(model, all);
    const Split split = make_split(all, f.split);
    const TrialSet& set = f.on == "all" ? all : pick(split, f.on);
    if (set.empty()) throw ValueError("evaluation set '" + f.on + "' is empty");
    const auto target = parse_target(f.target);
    if (target && static_cast<std::size_t>(*target) >= model.spec.num_classes)
        throw UsageError("--target " + std::to_string(*target) + " outside the model's classes");

    const std::string dataset = stem_of(f.split.data);
    const std::string split_name = f.split.split;
    const std::string victim = to_string(model.spec.kind);
    std::vector<ReportRow> rows;
    auto add = [&](const std::string& attack, EvalReport report) {
        rows.push_back({std::to_string(rows.size()), dataset, split_name, victim, attack, std::move(report)});
    };
    auto clean = evaluate_clean(model, set);
    if (target) {
        const auto predicted = predict_labels(model, set.trials);
        const auto hits = std::count(predicted.begin(), predicted.end(), *target);
        clean.target_rate = static_cast<double>(hits) / static_cast<double>(set.size());
    }
    add("clean", clean);
    if (f.baseline == "noise") add("noise", evaluate_perturbed_set(model, set, noise_baseline(set, f.xi, f.seed)));
    for (std::size_t i = 0; i < f.uaps.size(); ++i) {
        const Uap uap = read_uap(f.uaps[i]);
        check_placement(uap, set.channels(), set.samples(), {});
        const auto policy = uap.mode == UapMode::Mini
                                ? PlacementPolicy::random(f.placements, derive_seed(f.seed, 100 + i))
                                : PlacementPolicy::at({});
        add(stem_of(f.uaps[i]), evaluate_uap(model, set, uap, policy, target));
    }
    write_report(rows, f.out);
    out << report_csv(rows);
    return kExitOk;
}

int cmd_sweep(const SweepFlags& f, const CLI::App* cmd, std::ostream& out) {
    require(f.split.data, "--data");
    require(f.out, "--out");
    if (f.values.empty()) throw UsageError("--values needs at least one grid point");
    const TrialSet set = read_trials(f.split.data);
    const Split split = make_split(set, f.split);
    const auto kind = model_kind_from_string(f.victim);
    const auto spec = kind == ModelKind::Affine ? ModelSpec::affine(set.channels(), set.samples(), set.num_classes())
                                                : ModelSpec::small_cnn(set.channels(), set.samples(), set.num_classes());
    TrainConfig training;
    training.max_epochs = f.epochs;
    training.seed = derive_seed(f.seed, 1);
    const auto victim = fit_victim(spec, split.train, split.val, training).params;
    const double train_std = entry_stddev(split.train);
    const auto target = parse_target(f.attack.target);

    std::vector<ReportRow> rows;
    rows.push_back({"0", stem_of(f.split.data), f.split.split, f.victim, "clean", evaluate_clean(victim, split.test)});
    for (double value : f.values) {
        AttackFlags point = f.attack;
        Split data = split;
        if (f.param == "xi") {
            point.xi = value;
            point.xi_scale = 0.0;
        } else if (f.param == "xi-scale") {
            point.xi_scale = value;
        } else if (f.param == "batch-size") {
            if (value < 1 || value != std::floor(value)) throw UsageError("batch sizes must be positive integers");
            point.batch_size = static_cast<std::size_t>(value);
        } else {  // train-size
            if (value < 1 || value != std::floor(value)) throw UsageError("training sizes must be positive integers");
            const auto n = std::min(static_cast<std::size_t>(value), split.train.size());
            std::vector<std::size_t> order(split.train.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            auto rng = make_rng(f.seed, 2);
            std::shuffle(order.begin(), order.end(), rng);
            order.resize(n);
            data.train = split.train.subset(order);
        }
        const auto cfg = attack_config(point, cmd, set.num_classes(), train_std);
        const auto result = craft_with(victim, data, point, cfg);
        const auto policy = result.uap.mode == UapMode::Mini
                                ? PlacementPolicy::random(point.placements, derive_seed(f.seed, 3))
                                : PlacementPolicy::at({});
        std::ostringstream name;
        name << f.attack.method << '@' << f.param << '=' << value;
        rows.push_back({std::to_string(rows.size()), stem_of(f.split.data), f.split.split, f.victim, name.str(),
                        evaluate_uap(victim, split.test, result.uap, policy, target)});
    }
    write_report(rows, f.out);
    out << report_csv(rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// JSON config: keys are long flag names without the dashes. Top-level keys
// apply to whichever subcommand runs; an object named after the subcommand
// overrides them. Flags given on the command line always win.

std::string config_scalar(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw UsageError("config key '" + key + "' must be a string, number, boolean or array of those");
}

void merge_config(const std::string& path, CLI::App* cmd, const std::vector<std::string>& subcommands) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file " + path + " must hold a JSON object");

    nlohmann::json merged = nlohmann::json::object();
    for (const auto& [key, value] : doc.items())
        if (std::find(subcommands.begin(), subcommands.end(), key) == subcommands.end()) merged[key] = value;
    if (doc.contains(cmd->get_name())) {
        const auto& section = doc[cmd->get_name()];
        if (!section.is_object()) throw UsageError("config section '" + cmd->get_name() + "' must be an object");
        for (const auto& [key, value] : section.items()) merged[key] = value;
    }

    for (const auto& [key, value] : merged.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr) throw UsageError("config key '" + key + "' is not an option of " + cmd->get_name());
        if (opt->count() > 0) continue;
        if (value.is_array())
            for (const auto& item : value) opt->add_result(config_scalar(item, key));
        else
            opt->add_result(config_scalar(value, key));
        opt->run_callback();
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Universal adversarial perturbations for multichannel trial classifiers", "uapforge"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with default flag values")->check(CLI::ExistingFile);

    GenDataFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic trial file");
    gen_cmd->add_option("--classes", gen.synth.num_classes, "Number of classes K")->capture_default_str();
    gen_cmd->add_option("--channels", gen.synth.channels, "Channels C")->capture_default_str();
    gen_cmd->add_option("--samples", gen.synth.samples, "Samples per trial T")->capture_default_str();
    gen_cmd->add_option("--per-class", gen.synth.trials_per_class, "Trials per class")->capture_default_str();
    gen_cmd->add_option("--subjects", gen.synth.num_subjects, "Subjects")->capture_default_str();
    gen_cmd->add_option("--noise", gen.synth.noise_sigma, "Noise standard deviation")->capture_default_str();
    gen_cmd->add_option("--amplitude", gen.synth.class_amplitude, "Class component amplitude")->capture_default_str();
    gen_cmd->add_option("--background", gen.synth.background_amplitude, "Shared rhythm amplitude")
        ->capture_default_str();
    gen_cmd->add_option("--subject-shift", gen.synth.subject_shift_sigma, "Subject offset standard deviation")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.synth.seed, "Generator seed")->capture_default_str();
    gen_cmd->add_option("--normalize", gen.normalize, "none, zscore, mean-shift-clip or ema")
        ->check(CLI::IsMember({"none", "zscore", "mean-shift-clip", "ema"}))
        ->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory (receives trials.eegb)");

    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "Train a victim classifier");
    add_split_flags(train_cmd, train.split);
    train_cmd->add_option("--model", train.model, "affine or small-cnn")
        ->check(CLI::IsMember({"affine", "small-cnn"}))
        ->capture_default_str();
    train_cmd->add_option("--epochs", train.epochs, "Maximum epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--lr", train.lr, "Adam step size")->capture_default_str();
    train_cmd->add_option("--patience", train.patience, "Early-stopping patience")->capture_default_str();
    train_cmd->add_option("--class-weights", train.class_weights, "inverse or uniform")
        ->check(CLI::IsMember({"inverse", "uniform"}))
        ->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Initialization and shuffling seed")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Model JSON path");

    CraftFlags craft;
    auto* craft_cmd = app.add_subcommand("craft", "Craft a UAP against a trained model");
    add_split_flags(craft_cmd, craft.split);
    add_attack_flags(craft_cmd, craft.attack);
    craft_cmd->add_option("--model", craft.model, "Model JSON path")->check(CLI::ExistingFile);
    craft_cmd->add_option("--out", craft.out, "UAP file path");
    craft_cmd->add_option("--csv", craft.csv, "Also export the UAP as CSV");

    EvalFlags eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model, optionally under UAPs and baselines");
    add_split_flags(eval_cmd, eval.split);
    eval_cmd->add_option("--model", eval.model, "Model JSON path")->check(CLI::ExistingFile);
    eval_cmd->add_option("--uap", eval.uaps, "UAP file (repeatable)")->check(CLI::ExistingFile);
    eval_cmd->add_option("--baseline", eval.baseline, "none or noise")
        ->check(CLI::IsMember({"none", "noise"}))
        ->capture_default_str();
    eval_cmd->add_option("--xi", eval.xi, "Noise baseline bound")->capture_default_str();
    eval_cmd->add_option("--target", eval.target, "Target class for target-rate columns")->capture_default_str();
    eval_cmd->add_option("--placements", eval.placements, "Random placements per trial for mini UAPs")
        ->capture_default_str();
    eval_cmd->add_option("--on", eval.on, "test, val, train or all")
        ->check(CLI::IsMember({"test", "val", "train", "all"}))
        ->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Seed for noise and placements")->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "Report CSV path (JSON mirror alongside)");

    SweepFlags sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Craft and evaluate over a parameter grid");
    add_split_flags(sweep_cmd, sweep.split);
    add_attack_flags(sweep_cmd, sweep.attack);
    sweep_cmd->add_option("--victim", sweep.victim, "affine or small-cnn")
        ->check(CLI::IsMember({"affine", "small-cnn"}))
        ->capture_default_str();
    sweep_cmd->add_option("--epochs", sweep.epochs, "Victim training epochs")->capture_default_str();
    sweep_cmd->add_option("--param", sweep.param, "xi, xi-scale, batch-size or train-size")
        ->check(CLI::IsMember({"xi", "xi-scale", "batch-size", "train-size"}))
        ->capture_default_str();
    sweep_cmd->add_option("--values", sweep.values, "Grid points")->delimiter(',');
    sweep_cmd->add_option("--out", sweep.out, "Report CSV path (JSON mirror alongside)");
    sweep_cmd->get_option("--seed")->description("Seed for victim training and crafting");

    const std::vector<std::string> names{"gen-data", "train", "craft", "eval", "sweep"};
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        CLI::App* cmd = app.get_subcommands().front();
        if (!config_path.empty()) merge_config(config_path, cmd, names);
        if (cmd == gen_cmd) return cmd_gen_data(gen, out);
        if (cmd == train_cmd) return cmd_train(train, out);
        if (cmd == craft_cmd) return cmd_craft(craft, cmd, out);
        if (cmd == eval_cmd) return cmd_eval(eval, out);
        return cmd_sweep(sweep, cmd, out);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValueError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace uapforge::cli
