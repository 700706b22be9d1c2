// gapalign command-line driver: synth | train | eval | probe | report.

#include "gapalign/gapalign.hpp"

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gapalign;
using nlohmann::json;

namespace {

enum Exit : int { ok = 0, internal = 1, usage = 2, io_error = 3, data_error = 4, degenerate = 5, exists = 6 };

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::invalid_argument: return usage;
        case ErrorCode::io: return io_error;
        case ErrorCode::data: return data_error;
        case ErrorCode::degenerate: return degenerate;
        case ErrorCode::exists: return exists;
    }
    return internal;
}

// --config FILE: a flat JSON object whose keys are long flag names (with or
// without leading dashes, '_' accepted for '-'). The file is expanded into
// ordinary flags placed before the command line's own, and keys already given
// on the command line are dropped, so flags win over the file.
struct ConfigError {
    std::string message;
    int code;
};

std::string flag_name(std::string key) {
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    for (auto& ch : key)
        if (ch == '_') ch = '-';
    return "--" + key;
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!path || rest.size() < 2) return args;

    std::string content;
    try {
        content = text::read_file(*path);
    } catch (const Error& e) {
        throw ConfigError{e.what(), exit_code(e.code())};
    }
    json j;
    try {
        j = json::parse(content);
    } catch (const json::exception& e) {
        throw ConfigError{"config " + *path + " is not valid JSON: " + e.what(), usage};
    }
    if (!j.is_object()) throw ConfigError{"config " + *path + " must be a JSON object", usage};

    std::vector<std::string> given;
    for (std::size_t i = 2; i < rest.size(); ++i)
        if (rest[i].rfind("--", 0) == 0) given.push_back(rest[i].substr(0, rest[i].find('=')));
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };

    std::vector<std::string> out{rest[0], rest[1]};
    for (const auto& [key, value] : j.items()) {
        const std::string name = flag_name(key);
        if (std::find(given.begin(), given.end(), name) != given.end() || value.is_null()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) out.push_back(name);
            continue;
        }
        out.push_back(name);
        if (value.is_array())
            for (const auto& v : value) out.push_back(scalar(v));
        else
            out.push_back(scalar(value));
    }
    out.insert(out.end(), rest.begin() + 2, rest.end());
    return out;
}

void attach_config(CLI::App* sub) {
    sub->add_option("--config", "JSON file of flag values (flags override it)");
}

bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir))
        throw Error(ErrorCode::exists, "output path '" + dir.string() + "' exists and is not a directory");
    if (non_empty_dir(dir) && !force)
        throw Error(ErrorCode::exists, "output directory '" + dir.string() + "' is not empty (pass --force to overwrite)");
    fs::create_directories(dir);
}

void prepare_out_file(const fs::path& file, bool force) {
    if (fs::exists(file) && !force)
        throw Error(ErrorCode::exists, "output file '" + file.string() + "' exists (pass --force to overwrite)");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string dataset_fingerprint(const fs::path& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* name : {dataset_files::edges, dataset_files::features, dataset_files::labels, dataset_files::protos}) {
        h = fnv1a(name, h);
        h = fnv1a(std::string_view("\0", 1), h);
        h = fnv1a(text::read_file(dir / name), h);
    }
    return hex64(h);
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string command_line(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    SbmConfig cfg;
    std::string out;
    bool force = false;
};

void cmd_synth(const SynthArgs& a) {
    validate(a.cfg);
    prepare_out_dir(a.out, a.force);
    const auto g = synth_sbm(a.cfg);
    save_graph(g, a.out);
    std::cout << "wrote " << g.n_nodes << " nodes, " << g.edges.size() << " edges, " << g.n_classes
              << " classes to " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data, out, profile = "citation", mode;
    std::optional<std::int32_t> shots;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    std::optional<double> theta;
    double lambda = 0.8, val_frac = 0.1;
    bool no_monitor = false, force = false;
    TrainConfig cfg;
};

std::vector<EvalMode> parse_modes(const std::string& s) {
    if (s.empty()) return {};
    if (s == "both") return {EvalMode::zero_shot, EvalMode::fused};
    return {parse_eval_mode(s)};
}

json train_config_json(const TrainArgs& a) {
    return {{"data", a.data},
            {"shots", a.shots ? json(*a.shots) : json(nullptr)},
            {"epochs", a.cfg.epochs},
            {"lr", a.cfg.lr},
            {"tau", a.cfg.tau},
            {"lambda", a.lambda},
            {"profile", a.profile},
            {"theta", a.cfg.theta},
            {"monitor", a.cfg.monitor_enabled},
            {"degree_weights", a.cfg.degree_weights},
            {"hidden", a.cfg.hidden},
            {"batch_size", a.cfg.batch_size},
            {"ema_decay", a.cfg.ema_decay},
            {"val_frac", a.val_frac},
            {"mode", a.mode}};
}

json run_summary(std::uint64_t seed, const RunArtifacts& art) {
    return {{"seed", seed},
            {"epochs_run", art.curves.size()},
            {"baseline_sim_neg", opt_json(art.baseline)},
            {"stopped_at", art.stopped_at ? json(*art.stopped_at) : json(nullptr)},
            {"final_delta", opt_json(art.final_delta())}};
}

void write_run_files(const fs::path& dir, const RunArtifacts& art, std::vector<std::string>& artifacts) {
    text::write_file(dir / "curves.csv", curves_csv(art));
    text::write_file(dir / "curves.jsonl", curves_jsonl(art));
    save_params(art.final_params, dir / "params.json");
    for (const char* f : {"curves.csv", "curves.jsonl", "params.json"}) artifacts.push_back((dir / f).string());
}

void cmd_train(TrainArgs a, const std::string& cmdline, bool profile_given) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    const double profile_value = profile_theta(a.profile == "social" ? MonitorProfile::social : MonitorProfile::citation);
    a.cfg.theta = profile_value;
    if (a.theta) {
        if (profile_given && *a.theta != profile_value)
            std::cerr << "notice: --theta " << text::format_double(*a.theta) << " overrides --profile " << a.profile
                      << " (theta " << text::format_double(profile_value) << ")\n";
        a.cfg.theta = *a.theta;
    }
    a.cfg.monitor_enabled = !a.no_monitor;
    validate(a.cfg);

    const auto g = load_graph(a.data);
    prepare_out_dir(a.out, a.force);
    char theta_buf[32];
    std::snprintf(theta_buf, sizeof theta_buf, "%.2f", a.cfg.theta);
    std::cout << "profile=" << a.profile << " theta=" << theta_buf
              << " monitor=" << (a.cfg.monitor_enabled ? "on" : "off") << "\n";

    const bool sweep = !a.seeds.empty();
    const std::vector<std::uint64_t> seeds = sweep ? a.seeds : std::vector<std::uint64_t>{a.seed};
    EvalOptions eo;
    eo.dataset = fs::path(a.data).filename().string();
    if (eo.dataset.empty()) eo.dataset = fs::path(a.data).parent_path().filename().string();
    eo.shots = a.shots;
    eo.val_frac = a.val_frac;
    eo.lambda = a.lambda;
    eo.modes = parse_modes(a.mode);

    const auto res = multi_seed_eval(g, a.cfg, seeds, eo);
    std::vector<std::string> artifacts;
    json runs = json::array();
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const fs::path dir = sweep ? fs::path(a.out) / ("seed_" + std::to_string(seeds[k])) : fs::path(a.out);
        fs::create_directories(dir);
        write_run_files(dir, res.runs[k], artifacts);
        runs.push_back(run_summary(seeds[k], res.runs[k]));
        const auto& art = res.runs[k];
        std::cout << "seed=" << seeds[k] << " epochs=" << art.curves.size();
        if (art.stopped_at) std::cout << " stopped_at=" << *art.stopped_at;
        if (art.final_delta()) std::cout << " delta=" << text::format_double(*art.final_delta());
        std::cout << "\n";
    }
    text::write_file(fs::path(a.out) / "results.csv", results_csv(res.rows));
    text::write_file(fs::path(a.out) / "summary.csv", summary_csv(res.summary));
    artifacts.push_back((fs::path(a.out) / "results.csv").string());
    artifacts.push_back((fs::path(a.out) / "summary.csv").string());
    for (const auto& s : res.summary)
        std::cout << "accuracy[" << to_string(s.mode) << "]=" << text::format_double(s.mean)
                  << " std=" << text::format_double(s.std) << " n=" << s.n_seeds << "\n";

    const json config = train_config_json(a);
    artifacts.push_back((fs::path(a.out) / "run_meta.json").string());
    json meta{{"command", cmdline},
              {"config", config},
              {"config_hash", hex64(fnv1a(config.dump()))},
              {"seeds", seeds},
              {"dataset_fingerprint", dataset_fingerprint(a.data)},
              {"artifacts", artifacts},
              {"runs", runs},
              {"started_at", started},
              {"finished_at", utc_now()},
              {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
    if (!sweep) {
        meta["stopped_at"] = runs[0]["stopped_at"];
        meta["final_delta"] = runs[0]["final_delta"];
    }
    text::write_file(fs::path(a.out) / "run_meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// eval / probe

struct EvalArgs {
    std::string data, params, out, mode;
    std::optional<std::int32_t> shots;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    double lambda = 0.8, val_frac = 0.1, probe_lr = 0.5;
    std::int32_t probe_iters = 500;
    bool force = false;
};

void cmd_eval(const EvalArgs& a) {
    const auto g = load_graph(a.data);
    const auto params = load_params(a.params);
    if (!a.out.empty()) prepare_out_dir(a.out, a.force);
    EvalOptions eo;
    eo.dataset = fs::path(a.data).filename().string();
    eo.shots = a.shots;
    eo.val_frac = a.val_frac;
    eo.lambda = a.lambda;
    eo.probe_iters = a.probe_iters;
    eo.probe_lr = a.probe_lr;
    eo.modes = parse_modes(a.mode);
    const std::vector<std::uint64_t> seeds = a.seeds.empty() ? std::vector<std::uint64_t>{a.seed} : a.seeds;
    std::vector<ResultRow> rows;
    for (auto seed : seeds) {
        auto r = evaluate_split(g, make_split(g, a.shots, a.val_frac, seed), params, eo, seed);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    const auto summary = summarize(rows);
    for (const auto& r : rows)
        std::cout << "seed=" << r.seed << " mode=" << to_string(r.mode) << " accuracy=" << text::format_double(r.accuracy)
                  << "\n";
    for (const auto& s : summary)
        std::cout << "accuracy[" << to_string(s.mode) << "]=" << text::format_double(s.mean)
                  << " std=" << text::format_double(s.std) << " n=" << s.n_seeds << "\n";
    if (!a.out.empty()) {
        text::write_file(fs::path(a.out) / "results.csv", results_csv(rows));
        text::write_file(fs::path(a.out) / "summary.csv", summary_csv(summary));
    }
}

struct ProbeArgs {
    std::string data, params, out;
    std::int32_t shots = 1, iters = 500;
    std::uint64_t seed = 0;
    double lr = 0.5, val_frac = 0.1;
    bool force = false;
};

void cmd_probe(const ProbeArgs& a) {
    const auto g = load_graph(a.data);
    const auto params = load_params(a.params);
    prepare_out_file(a.out, a.force);
    const auto split = make_split(g, a.shots, a.val_frac, a.seed);
    const Matrix h = encode(params, normalize_adjacency(g), g.features);
    const Matrix h_train = gather_rows(h, split.train_ids);
    const auto y_train = gather_labels(g.labels, split.train_ids);
    const auto clf = train_graph_classifier(h_train, y_train, g.n_classes, a.iters, a.lr);
    const auto pe = probe_loss_and_grad(clf, h_train, y_train);
    const auto dec = span_decompose(h_train, normalize_rows(g.text_protos));
    FusionModel model{normalize_rows(g.text_protos), clf, 0.8};
    const double train_acc = evaluate(model, h_train, y_train, EvalMode::fused).accuracy;

    json j{{"classifier", to_json(clf)},
           {"seed", a.seed},
           {"shots", a.shots},
           {"iters", a.iters},
           {"lr", a.lr},
           {"train_loss", pe.loss.total},
           {"train_fused_accuracy", train_acc},
           {"perp_norm_fraction", dec.perp_norm_fraction}};
    text::write_file(a.out, j.dump(2) + "\n");
    std::cout << "train_loss=" << text::format_double(pe.loss.total)
              << " perp_norm_fraction=" << text::format_double(dec.perp_norm_fraction) << "\n";
}

// ---------------------------------------------------------------------------
// report

struct Curves {
    std::vector<std::string> header;
    std::map<std::int64_t, std::vector<std::string>> rows;  // epoch -> fields

    [[nodiscard]] std::ptrdiff_t col(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<std::ptrdiff_t>(k);
        return -1;
    }
    [[nodiscard]] std::optional<double> value(std::int64_t epoch, const std::string& name) const {
        const auto it = rows.find(epoch);
        const auto c = col(name);
        if (it == rows.end() || c < 0 || static_cast<std::size_t>(c) >= it->second.size()) return std::nullopt;
        double v = 0.0;
        if (!text::parse_double(it->second[static_cast<std::size_t>(c)], v)) return std::nullopt;
        return v;
    }
};

Curves read_curves(const fs::path& run) {
    const fs::path file = run / "curves.csv";
    if (!fs::exists(file)) throw Error(ErrorCode::io, "missing curves file: expected " + file.string());
    const auto lines = text::read_content_lines(file);
    if (lines.empty()) throw text::data_error(file, 1, "empty curves file (no header)");
    Curves c;
    for (auto f : text::split(lines[0].text, ",")) c.header.emplace_back(f);
    if (c.col("epoch") != 0) throw text::data_error(file, lines[0].number, "header must start with 'epoch'");
    for (std::size_t k = 1; k < lines.size(); ++k) {
        std::vector<std::string> fields;
        for (auto f : text::split(lines[k].text, ",")) fields.emplace_back(f);
        if (fields.size() != c.header.size())
            throw text::data_error(file, lines[k].number, "expected " + std::to_string(c.header.size()) + " fields");
        std::int64_t epoch = 0;
        if (!text::parse_int(fields[0], epoch)) throw text::data_error(file, lines[k].number, "bad epoch");
        c.rows[epoch] = std::move(fields);
    }
    return c;
}

void print_run_summary(const fs::path& run, const Curves& c) {
    std::cout << "run=" << run.string() << "\n";
    const fs::path summary = run / "summary.csv";
    bool acc_printed = false;
    if (fs::exists(summary)) {
        const auto lines = text::read_content_lines(summary);
        for (std::size_t k = 1; k < lines.size(); ++k) {
            const auto f = text::split(lines[k].text, ",");
            if (f.size() >= 4) {
                std::cout << "final_accuracy[" << f[1] << "]=" << f[3] << "\n";
                acc_printed = true;
            }
        }
    }
    if (!acc_printed && !c.rows.empty()) {
        const auto v = c.value(c.rows.rbegin()->first, "val_acc");
        std::cout << "final_val_acc=" << (v ? text::format_double(*v) : std::string("NA")) << "\n";
    }
    std::optional<std::int64_t> stopped;
    std::optional<double> dmin, dmax;
    for (const auto& [epoch, fields] : c.rows) {
        if (const auto s = c.value(epoch, "stopped"); s && *s != 0.0 && !stopped) stopped = epoch;
        if (const auto d = c.value(epoch, "delta")) {
            dmin = dmin ? std::min(*dmin, *d) : *d;
            dmax = dmax ? std::max(*dmax, *d) : *d;
        }
    }
    std::cout << "epochs=" << c.rows.size() << "\n";
    std::cout << "stopped_at=" << (stopped ? std::to_string(*stopped) : std::string("none")) << "\n";
    if (dmin) std::cout << "delta_min=" << text::format_double(*dmin) << " delta_max=" << text::format_double(*dmax) << "\n";
}

struct ReportArgs {
    std::string run, out;
    std::vector<std::string> compare;
    bool force = false;
};

void cmd_report(const ReportArgs& a) {
    static const std::vector<std::string> series = {"sim_overall", "sim_pos", "sim_neg", "gap", "var_mean", "val_acc", "delta"};
    auto fmt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
    std::string csv;
    fs::path out;
    if (!a.compare.empty()) {
        require(a.compare.size() == 2, "report: --compare takes exactly two run directories");
        require(a.run.empty(), "report: give either a run directory or --compare a b");
        const fs::path ra = a.compare[0], rb = a.compare[1];
        const auto ca = read_curves(ra), cb = read_curves(rb);
        print_run_summary(ra, ca);
        print_run_summary(rb, cb);
        out = a.out.empty() ? ra / "report.csv" : fs::path(a.out);
        std::set<std::int64_t> epochs;
        for (const auto& [e, f] : ca.rows) epochs.insert(e);
        for (const auto& [e, f] : cb.rows) epochs.insert(e);
        csv = "epoch";
        for (const auto& s : series) csv += ",a_" + s;
        for (const auto& s : series) csv += ",b_" + s;
        csv += ",gap_diff\n";
        for (auto e : epochs) {
            csv += std::to_string(e);
            for (const auto& s : series) csv += "," + fmt(ca.value(e, s));
            for (const auto& s : series) csv += "," + fmt(cb.value(e, s));
            const auto ga = ca.value(e, "gap"), gb = cb.value(e, "gap");
            csv += "," + (ga && gb ? text::format_double(*ga - *gb) : std::string()) + "\n";
        }
    } else {
        require(!a.run.empty(), "report: a run directory (or --compare a b) is required");
        const auto c = read_curves(a.run);
        print_run_summary(a.run, c);
        out = a.out.empty() ? fs::path(a.run) / "report.csv" : fs::path(a.out);
        csv = "epoch";
        for (const auto& s : series) csv += "," + s;
        csv += "\n";
        for (const auto& [e, f] : c.rows) {
            csv += std::to_string(e);
            for (const auto& s : series) csv += "," + fmt(c.value(e, s));
            csv += "\n";
        }
    }
    prepare_out_file(out, a.force);
    text::write_file(out, csv);
    std::cout << "wrote " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gapalign: graph/text representation-gap training and evaluation"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a stochastic-block-model dataset");
    attach_config(synth);
    synth->add_option("--classes", sa.cfg.n_classes, "number of classes")->capture_default_str()->check(CLI::Range(1, 1 << 20));
    synth->add_option("--per-class", sa.cfg.nodes_per_class, "nodes per class")->capture_default_str()->check(CLI::Range(1, 1 << 24));
    synth->add_option("--p-intra", sa.cfg.p_intra, "intra-block edge probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    synth->add_option("--p-inter", sa.cfg.p_inter, "inter-block edge probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    synth->add_option("--noise", sa.cfg.feature_noise, "feature noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth->add_option("--separation", sa.cfg.proto_separation, "class centroid scale")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth->add_option("--dim", sa.cfg.dim, "feature / prototype dimension")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--seed", sa.cfg.seed, "generator seed")->capture_default_str();
    synth->add_option("--out", sa.out, "output dataset directory")->required();
    synth->add_flag("--force", sa.force, "overwrite a non-empty output directory");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "contrastive training with gap monitoring");
    attach_config(train);
    train->add_option("--data", ta.data, "dataset directory")->required();
    train->add_option("--out", ta.out, "run output directory")->required();
    train->add_option("--shots", ta.shots, "labelled nodes per class (absent = zero-shot)")->check(CLI::PositiveNumber);
    auto* seed_opt = train->add_option("--seed", ta.seed, "run seed")->capture_default_str();
    train->add_option("--seeds", ta.seeds, "comma-separated seed sweep (e.g. 0,1,2,3,4)")->delimiter(',')->excludes(seed_opt);
    train->add_option("--epochs", ta.cfg.epochs, "epoch budget")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--lr", ta.cfg.lr, "peak learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--tau", ta.cfg.tau, "contrastive temperature")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--lambda", ta.lambda, "fusion weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    auto* profile_opt = train->add_option("--profile", ta.profile, "threshold preset")
                            ->capture_default_str()
                            ->check(CLI::IsMember({"citation", "social"}));
    train->add_option("--theta", ta.theta, "early-stopping threshold (overrides --profile)")->check(CLI::PositiveNumber);
    train->add_flag("--no-monitor", ta.no_monitor, "disable early stopping");
    train->add_flag("--degree-weights", ta.cfg.degree_weights, "degree-weight sim_pos");
    train->add_option("--hidden", ta.cfg.hidden, "hidden width")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--batch-size", ta.cfg.batch_size, "node batch size")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--val-frac", ta.val_frac, "validation fraction per class")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    train->add_option("--mode", ta.mode, "result mode (default: fused with --shots, else zero_shot)")
        ->check(CLI::IsMember({"zero_shot", "fused", "both"}));
    train->add_flag("--force", ta.force, "overwrite a non-empty output directory");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate a trained encoder (zero-shot and/or fused)");
    attach_config(eval);
    eval->add_option("--data", ea.data, "dataset directory")->required();
    eval->add_option("--params", ea.params, "encoder params.json")->required();
    eval->add_option("--out", ea.out, "directory for results.csv / summary.csv");
    eval->add_option("--shots", ea.shots, "labelled nodes per class for the probe")->check(CLI::PositiveNumber);
    auto* eseed = eval->add_option("--seed", ea.seed, "split seed")->capture_default_str();
    eval->add_option("--seeds", ea.seeds, "comma-separated split seeds")->delimiter(',')->excludes(eseed);
    eval->add_option("--mode", ea.mode, "zero_shot | fused | both")->check(CLI::IsMember({"zero_shot", "fused", "both"}));
    eval->add_option("--lambda", ea.lambda, "fusion weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    eval->add_option("--val-frac", ea.val_frac, "validation fraction per class")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    eval->add_option("--probe-iters", ea.probe_iters, "probe gradient steps")->capture_default_str()->check(CLI::NonNegativeNumber);
    eval->add_option("--probe-lr", ea.probe_lr, "probe step size")->capture_default_str()->check(CLI::PositiveNumber);
    eval->add_flag("--force", ea.force, "overwrite a non-empty output directory");

    ProbeArgs pa;
    auto* probe = app.add_subcommand("probe", "fit the graph-space classifier on frozen embeddings");
    attach_config(probe);
    probe->add_option("--data", pa.data, "dataset directory")->required();
    probe->add_option("--params", pa.params, "encoder params.json")->required();
    probe->add_option("--out", pa.out, "output probe.json")->required();
    probe->add_option("--shots", pa.shots, "labelled nodes per class")->capture_default_str()->check(CLI::PositiveNumber);
    probe->add_option("--seed", pa.seed, "split seed")->capture_default_str();
    probe->add_option("--iters", pa.iters, "gradient steps")->capture_default_str()->check(CLI::NonNegativeNumber);
    probe->add_option("--lr", pa.lr, "step size")->capture_default_str()->check(CLI::PositiveNumber);
    probe->add_option("--val-frac", pa.val_frac, "validation fraction per class")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    probe->add_flag("--force", pa.force, "overwrite an existing output file");

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "summarize run curves and emit report.csv");
    attach_config(report);
    report->add_option("run", ra.run, "run directory");
    report->add_option("--compare", ra.compare, "two run directories to compare")->expected(2);
    report->add_option("--out", ra.out, "report CSV path (default <run>/report.csv)");
    report->add_flag("--force", ra.force, "overwrite an existing report");

    try {
        auto args = expand_config(std::vector<std::string>(argv, argv + argc));
        std::vector<char*> cargs;
        for (auto& a : args) cargs.push_back(a.data());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        const auto cmdline = command_line(argc, argv);
        if (*synth) cmd_synth(sa);
        else if (*train) cmd_train(ta, cmdline, profile_opt->count() > 0);
        else if (*eval) cmd_eval(ea);
        else if (*probe) cmd_probe(pa);
        else if (*report) cmd_report(ra);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return internal;
    }
    return ok;
}
