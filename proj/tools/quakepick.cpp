// quakepick command line: training, picking, evaluation, synthetic data and benchmarks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpk/evaluation.hpp"
#include "qpk/pipeline.hpp"
#include "qpk/stacking.hpp"
#include "qpk/synth.hpp"

namespace {

using namespace qpk;

std::ofstream open_out(const std::string& path) {
    if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return in;
}

std::vector<TriTrace> read_traces(const std::vector<std::string>& paths) {
    std::vector<TriTrace> out;
    for (const auto& p : paths) out.push_back(read_trace_file(p));
    return out;
}

PipelineConfig pipeline_config(const std::string& path) {
    return path.empty() ? PipelineConfig{} : load_pipeline_config(path);
}

struct TrainArgs {
    std::string features, out;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

int run_train(const TrainArgs& a) {
    auto in = open_in(a.features);
    const auto table = read_feature_table(in);
    StackConfig cfg;
    cfg.inner_folds = a.folds;
    cfg.seed = a.seed;
    cfg.workers = a.workers;
    const auto bundle = train_stack(table, cfg);
    bundle.save(a.out);
    std::cerr << "trained on " << table.rows() << " rows, " << table.names.size() << " features\n";
    for (std::size_t j = 0; j < bundle.base_names.size(); ++j) {
        std::cerr << "  " << bundle.base_names[j] << " weight " << bundle.meta_weights[j] << '\n';
    }
    return 0;
}

struct PickArgs {
    std::string bundle, stations, out, config;
    std::vector<std::string> in;
    double threshold = -1.0;
    std::size_t workers = 1;
    bool baseline = false;
};

int run_pick(const PickArgs& a) {
    auto cfg = pipeline_config(a.config);
    if (a.threshold >= 0.0) cfg.stack_threshold = a.threshold;
    PipelineOptions opt;
    opt.workers = a.workers;
    opt.bypass_classifier = a.baseline;
    std::shared_ptr<const ModelBundle> bundle;
    if (!a.baseline) {
        if (a.bundle.empty()) throw Error("pick: --bundle is required unless --baseline is given");
        bundle = std::make_shared<const ModelBundle>(ModelBundle::load(a.bundle));
        cfg.feature.post_s = bundle->post_s;
    }
    const auto res = run_stream(read_traces(a.in), bundle, load_stations_file(a.stations), cfg, opt);
    auto out = open_out(a.out);
    write_associated_picks(out, res.picks);
    std::cerr << "samples " << res.counts.samples << ", candidates " << res.counts.candidates << ", classified "
              << res.counts.classified << ", picks " << res.counts.refined << ", dropped at edges "
              << res.counts.dropped_edge << '\n';
    return 0;
}

struct EvalArgs {
    std::string picks, labels, report, sweep;
    double tol_s = 0.4;
    std::vector<std::string> cluster_bundles;  // STATION=path
    std::size_t clusters = 4;
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
    const auto picks = read_picks_file(a.picks);
    const auto labels = load_labels_file(a.labels);
    const auto r = evaluate(picks, labels, a.tol_s);
    EvalDocument doc;
    doc.folds.push_back({r.precision, r.recall, r.f_score});
    doc.mean = doc.folds.front();
    if (!a.sweep.empty()) doc.sweep = tolerance_sweep(picks, labels, parse_sweep_grid(a.sweep));
    if (!a.cluster_bundles.empty()) {
        std::map<std::string, ModelBundle> bundles;
        for (const auto& item : a.cluster_bundles) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw Error("eval: --cluster-bundle expects STATION=path");
            bundles.emplace(item.substr(0, eq), ModelBundle::load(item.substr(eq + 1)));
        }
        doc.clusters = cluster_station_weights(bundles, a.clusters, a.seed);
    }
    auto out = open_out(a.report);
    out << doc.to_json() << '\n';
    std::printf("precision %.4f recall %.4f f %.4f (%zu picks, %zu labels, tol %.3f s)\n", r.precision, r.recall,
                r.f_score, picks.size(), labels.size(), a.tol_s);
    return 0;
}

struct SynthArgs {
    std::string config, out_dir, format = "bin";
    std::size_t workers = 1;
};

int run_synth(const SynthArgs& a) {
    const auto cfg = a.config.empty() ? SynthConfig{} : load_synth_config(a.config);
    const auto corpus = gen_corpus(cfg, a.workers);
    if (a.format != "bin" && a.format != "csv") throw Error("synth: --format must be bin or csv");
    write_corpus(corpus, a.out_dir, a.format == "bin" ? TraceFormat::Bin : TraceFormat::Csv);
    std::cerr << "wrote " << corpus.blocks.size() << " block(s), " << corpus.stations.size() << " stations, "
              << corpus.all_labels().size() << " labels to " << a.out_dir << '\n';
    return 0;
}

struct FeaturesArgs {
    std::vector<std::string> in;
    std::string candidates = "auto-trigger", labels, out, config;
    double tol_s = 0.4;
    double post_s = -1.0;
    std::size_t workers = 1;
};

int run_features(const FeaturesArgs& a) {
    auto cfg = pipeline_config(a.config);
    if (a.post_s > 0.0) cfg.feature.post_s = a.post_s;
    cfg.feature.validate();
    const auto streams = read_traces(a.in);
    const auto candidates =
        a.candidates == "auto-trigger" ? auto_candidates(streams, cfg.trigger) : read_picks_file(a.candidates);
    const auto labels = a.labels.empty() ? std::vector<LabeledArrival>{} : load_labels_file(a.labels);
    const auto table = build_feature_table(streams, candidates, labels, cfg.feature, a.tol_s, a.workers);
    auto out = open_out(a.out);
    write_feature_table(out, table);
    std::size_t pos = 0;
    for (int l : table.label) pos += l == 1;
    std::cerr << table.rows() << " rows (" << pos << " positive), " << table.names.size() << " features\n";
    return 0;
}

struct BenchArgs {
    std::string bundle, stations, report, config;
    std::vector<std::string> in;
    std::size_t parallel = 2;
};

int run_bench(const BenchArgs& a) {
    auto cfg = pipeline_config(a.config);
    auto bundle = std::make_shared<const ModelBundle>(ModelBundle::load(a.bundle));
    cfg.feature.post_s = bundle->post_s;
    const auto streams = read_traces(a.in);
    std::vector<Station> stations;
    if (!a.stations.empty()) {
        stations = load_stations_file(a.stations);
    } else {
        // Without a catalog every stream sits at the same place, so any two
        // simultaneous picks associate.
        for (const auto& s : streams) stations.push_back({s.station_id(), 0.0, 0.0});
    }
    const auto rep = bench(streams, bundle, stations, cfg, a.parallel);
    auto out = open_out(a.report);
    out << rep.to_json() << '\n';
    std::cout << rep.to_json() << '\n';
    return rep.parallel_matches_serial ? 0 : 3;
}

struct KfoldArgs {
    std::string data, report, config;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    double tol_s = 0.4;
    std::size_t workers = 1;
};

int run_kfold(const KfoldArgs& a) {
    const auto corpus = read_corpus(a.data);
    KFoldOptions opt;
    opt.pipeline = pipeline_config(a.config);
    opt.stack.inner_folds = a.folds;
    opt.stack.seed = a.seed;
    opt.tol_s = a.tol_s;
    opt.workers = a.workers;
    const auto res = kfold_by_block(corpus.blocks, corpus.stations, opt);
    EvalDocument doc;
    for (const auto& f : res.folds) {
        doc.folds.push_back({f.report.precision, f.report.recall, f.report.f_score});
        std::printf("block %d: precision %.4f recall %.4f f %.4f (trained on %zu rows)\n", f.tag, f.report.precision,
                    f.report.recall, f.report.f_score, f.train_rows);
    }
    doc.mean = {res.mean_precision, res.mean_recall, res.mean_f};
    std::printf("mean: precision %.4f recall %.4f f %.4f\n", res.mean_precision, res.mean_recall, res.mean_f);
    auto out = open_out(a.report);
    out << doc.to_json() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming P-phase picker: trigger, stacked classifier and AIC refinement"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Fit the stacked ensemble on a feature table");
    t->add_option("--features", train.features, "Feature table CSV")->required();
    t->add_option("--out", train.out, "Output bundle JSON")->required();
    t->add_option("--folds", train.folds, "Inner folds for out-of-fold judgements")->check(CLI::Range(2, 100));
    t->add_option("--seed", train.seed, "Random seed");
    t->add_option("--workers", train.workers, "Training threads")->check(CLI::PositiveNumber);

    PickArgs pick;
    auto* p = app.add_subcommand("pick", "Run the streaming pipeline over trace files");
    p->add_option("--bundle", pick.bundle, "Model bundle JSON");
    p->add_option("--stations", pick.stations, "Station catalog CSV")->required();
    p->add_option("--in", pick.in, "Trace files (.csv or .bin)")->required();
    p->add_option("--out", pick.out, "Output picks CSV")->required();
    p->add_option("--threshold", pick.threshold, "Classifier confidence threshold")->check(CLI::Range(0.0, 1.0));
    p->add_option("--config", pick.config, "Pipeline config (TOML-like)");
    p->add_option("--workers", pick.workers, "Station worker threads")->check(CLI::PositiveNumber);
    p->add_flag("--baseline", pick.baseline, "Bypass the classifier (trigger + refiner only)");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Score picks against labels");
    e->add_option("--picks", eval.picks, "Picks CSV")->required();
    e->add_option("--labels", eval.labels, "Labels CSV")->required();
    e->add_option("--tol-s", eval.tol_s, "Matching tolerance in seconds (strict)")->check(CLI::NonNegativeNumber);
    e->add_option("--sweep", eval.sweep, "Tolerance grid start:stop:step");
    e->add_option("--report", eval.report, "Report JSON")->required();
    e->add_option("--cluster-bundle", eval.cluster_bundles, "Per-station bundle as STATION=path (repeatable)");
    e->add_option("--clusters", eval.clusters, "k for station weight clustering")->check(CLI::PositiveNumber);
    e->add_option("--seed", eval.seed, "Clustering seed");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic multi-station corpus");
    s->add_option("--config", synth.config, "synth.toml");
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    s->add_option("--format", synth.format, "Trace format: bin or csv");
    s->add_option("--workers", synth.workers, "Generator threads")->check(CLI::PositiveNumber);

    FeaturesArgs feat;
    auto* f = app.add_subcommand("features", "Export a training feature table");
    f->add_option("--in", feat.in, "Trace files")->required();
    f->add_option("--candidates", feat.candidates, "Candidate picks CSV or 'auto-trigger'");
    f->add_option("--labels", feat.labels, "Labels CSV; candidates within --tol-s of a label are positive");
    f->add_option("--tol-s", feat.tol_s, "Labelling tolerance")->check(CLI::PositiveNumber);
    f->add_option("--post-s", feat.post_s, "Post-window length AN in seconds");
    f->add_option("--config", feat.config, "Pipeline config (TOML-like)");
    f->add_option("--out", feat.out, "Output feature CSV")->required();
    f->add_option("--workers", feat.workers, "Extraction threads")->check(CLI::PositiveNumber);

    BenchArgs bench_args;
    auto* b = app.add_subcommand("bench", "Time each pipeline stage, serial and parallel");
    b->add_option("--bundle", bench_args.bundle, "Model bundle JSON")->required();
    b->add_option("--in", bench_args.in, "Trace files")->required();
    b->add_option("--stations", bench_args.stations, "Station catalog CSV");
    b->add_option("--report", bench_args.report, "Report JSON")->required();
    b->add_option("--parallel", bench_args.parallel, "Worker count for the parallel run")->check(CLI::PositiveNumber);
    b->add_option("--config", bench_args.config, "Pipeline config (TOML-like)");

    KfoldArgs kfold;
    auto* k = app.add_subcommand("kfold", "Leave-one-block-out evaluation over a synth corpus directory");
    k->add_option("--data", kfold.data, "Corpus directory written by synth")->required();
    k->add_option("--report", kfold.report, "Report JSON")->required();
    k->add_option("--config", kfold.config, "Pipeline config (TOML-like)");
    k->add_option("--folds", kfold.folds, "Inner stacking folds")->check(CLI::Range(2, 100));
    k->add_option("--seed", kfold.seed, "Random seed");
    k->add_option("--tol-s", kfold.tol_s, "Matching tolerance")->check(CLI::PositiveNumber);
    k->add_option("--workers", kfold.workers, "Threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*t) return run_train(train);
        if (*p) return run_pick(pick);
        if (*e) return run_eval(eval);
        if (*s) return run_synth(synth);
        if (*f) return run_features(feat);
        if (*b) return run_bench(bench_args);
        if (*k) return run_kfold(kfold);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
