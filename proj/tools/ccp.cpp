// ccp: command-line surface for the CCP dimensionality-reduction toolkit.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccp/eval.hpp"
#include "ccp/projection.hpp"
#include "ccp/rs_scores.hpp"
#include "ccp/shape.hpp"

using nlohmann::json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = available parallelism / CCP_THREADS
};

void apply_threads(const CommonOpts& c) {
    unsigned n = c.threads;
    if (n == 0) {
        if (const char* env = std::getenv("CCP_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v > 0) n = static_cast<unsigned>(v);
        }
    }
    if (n == 0) n = std::thread::hardware_concurrency();
    ccp::set_thread_count(n);
}

// Every output gets a sibling <out>.config.json echoing the full run
// configuration so results are reproducible from the file alone.
void write_config_echo(const std::string& out_path, const json& config) {
    std::ofstream out(out_path + ".config.json");
    if (!out) throw ccp::DataError("cannot write file: " + out_path + ".config.json");
    out << config.dump(2) << '\n';
}

ccp::KernelConfig make_kernel(const std::string& family, double kappa, double tau,
                              const std::string& cutoff, double cutoff_s) {
    ccp::KernelConfig k;
    k.family = ccp::family_from_name(family);
    k.kappa = kappa;
    k.tau = tau;
    if (cutoff == "none") {
        k.cutoff = ccp::CutoffPolicy::none();
    } else if (cutoff == "mean_plus_sd") {
        k.cutoff = ccp::CutoffPolicy::mean_plus_sd(cutoff_s);
    } else {
        throw CLI::ValidationError("--cutoff must be none or mean_plus_sd");
    }
    return k;
}

std::vector<std::size_t> parse_sweep(const std::string& spec) {
    // "start:stop:step" inclusive, or a single value
    std::vector<std::size_t> out;
    const auto c1 = spec.find(':');
    if (c1 == std::string::npos) {
        out.push_back(std::stoul(spec));
        return out;
    }
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw CLI::ValidationError("sweep must be start:stop:step");
    const std::size_t start = std::stoul(spec.substr(0, c1));
    const std::size_t stop = std::stoul(spec.substr(c1 + 1, c2 - c1 - 1));
    const std::size_t step = std::stoul(spec.substr(c2 + 1));
    if (step == 0 || start > stop) throw CLI::ValidationError("bad sweep range");
    for (std::size_t n = start; n <= stop; n += step) out.push_back(n);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CCP: correlated clustering and kernel projection toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--seed", common.seed, "random seed controlling all randomized behavior")
        ->capture_default_str();
    app.add_option("--threads", common.threads,
                   "worker threads (0 = CCP_THREADS env or all cores)")
        ->capture_default_str();

    // shared flag storage
    std::string input, labels_col, out, model_path;
    std::size_t n_components = 10;
    std::string metric = "covariance", family = "exp", cutoff = "mean_plus_sd";
    double kappa = 1.0, tau = 2.0, cutoff_s = 3.0;
    std::string scheme = "correlated", update_rule = "min_sum";
    bool standardize = true;

    auto add_kernel_flags = [&](CLI::App* cmd) {
        cmd->add_option("--kernel", family, "kernel family: exp|lorentz (default exp)")
            ->capture_default_str();
        cmd->add_option("--kappa", kappa, "kernel power (default 1)")->capture_default_str();
        cmd->add_option("--tau", tau, "kernel multiscale parameter (default 2)")
            ->capture_default_str();
        cmd->add_option("--cutoff", cutoff, "cutoff policy: none|mean_plus_sd (default mean_plus_sd)")
            ->capture_default_str();
        cmd->add_option("--cutoff-s", cutoff_s,
                        "stddev multiplier for mean_plus_sd (default 3)")
            ->capture_default_str();
    };
    auto add_fit_flags = [&](CLI::App* cmd) {
        cmd->add_option("--n", n_components, "cluster / component count (default 10)")
            ->capture_default_str();
        cmd->add_option("--metric", metric, "feature metric: covariance|correlation")
            ->capture_default_str();
        cmd->add_option("--scheme", scheme, "partition scheme: correlated|random|variance")
            ->capture_default_str();
        cmd->add_option("--update-rule", update_rule, "medoid update: min_sum|center_proxy")
            ->capture_default_str();
        cmd->add_flag("--standardize,!--no-standardize", standardize,
                      "standardize features for the clustering metric (default on)");
        add_kernel_flags(cmd);
    };

    // ---- fit ----
    auto* fit_cmd = app.add_subcommand("fit", "fit a CCP model on a CSV dataset");
    fit_cmd->add_option("--input", input, "input CSV")->required();
    fit_cmd->add_option("--labels", labels_col, "label column name (dropped from features)");
    fit_cmd->add_option("--out", out, "output model path (writes <out> and <out>.bin)")
        ->required();
    add_fit_flags(fit_cmd);

    // ---- transform ----
    std::string transform_kind = "rigidity";
    std::string centrality = "degree";
    double rc_fraction = 0.7;
    auto* tr_cmd = app.add_subcommand("transform", "apply a fitted model to a CSV dataset");
    tr_cmd->add_option("--model", model_path, "model path from fit")->required();
    tr_cmd->add_option("--input", input, "input CSV")->required();
    tr_cmd->add_option("--labels", labels_col, "label column passed through to the output");
    tr_cmd->add_option("--out", out, "output embedding CSV")->required();
    tr_cmd->add_option("--projection", transform_kind,
                       "projection type: rigidity|centrality (default rigidity)")
        ->capture_default_str();
    tr_cmd->add_option("--centrality", centrality,
                       "centrality kind: degree|closeness|betweenness|eigenvector")
        ->capture_default_str();
    tr_cmd->add_option("--rc-fraction", rc_fraction,
                       "graph cutoff as a fraction of d_max (default 0.7)")
        ->capture_default_str();

    // ---- eval ----
    std::string reducer = "ccp", n_sweep = "10";
    std::size_t k_folds = 5, k_nn = 5, n_seeds = 10;
    bool post_scale = true;
    auto* ev_cmd = app.add_subcommand("eval", "cross-validated kNN accuracy, optionally over an N sweep");
    ev_cmd->add_option("--input", input, "input CSV")->required();
    ev_cmd->add_option("--labels", labels_col, "label column name")->required();
    ev_cmd->add_option("--out", out, "output CSV (N,mean,sd,per-class columns)")->required();
    ev_cmd->add_option("--reducer", reducer, "reducer: ccp|ccp_centrality|pca|none")
        ->capture_default_str();
    ev_cmd->add_option("--n-sweep", n_sweep, "component counts, start:stop:step or single N")
        ->capture_default_str();
    ev_cmd->add_option("--folds", k_folds, "cross-validation folds (default 5)")
        ->capture_default_str();
    ev_cmd->add_option("--seeds", n_seeds, "number of seeds, used as seed..seed+count-1 (default 10)")
        ->capture_default_str();
    ev_cmd->add_option("--k", k_nn, "kNN neighbor count (default 5)")->capture_default_str();
    ev_cmd->add_flag("--post-scale,!--no-post-scale", post_scale,
                     "standard-scale embeddings with train statistics (default on)");
    ev_cmd->add_option("--centrality", centrality, "centrality kind for ccp_centrality")
        ->capture_default_str();
    ev_cmd->add_option("--rc-fraction", rc_fraction, "graph cutoff fraction")
        ->capture_default_str();
    add_fit_flags(ev_cmd);

    // ---- rs ----
    std::string pred_col;
    bool rs_on_embedding = false;
    auto* rs_cmd = app.add_subcommand("rs", "residue-similarity scores and indices");
    rs_cmd->add_option("--input", input, "input CSV of points (embedding or raw)")->required();
    rs_cmd->add_option("--labels", labels_col, "true label column name")->required();
    rs_cmd->add_option("--predicted", pred_col, "optional predicted label column name");
    rs_cmd->add_option("--out", out, "output prefix (writes <out>.json and <out>.csv)")
        ->required();
    (void)rs_on_embedding;

    // ---- shape ----
    std::size_t resolution = 128;
    double padding = 0.15, isovalue = 0.1;
    int class_filter = -1;
    auto* sh_cmd = app.add_subcommand("shape", "rigidity density grid and isosurface extraction");
    sh_cmd->add_option("--input", input, "input CSV of 2-D or 3-D points")->required();
    sh_cmd->add_option("--labels", labels_col, "label column (needed for --class)");
    sh_cmd->add_option("--class", class_filter, "restrict the density to one class id");
    sh_cmd->add_option("--out", out,
                       "output prefix (.grid.bin, .grid.csv and .obj or .contour.csv)")
        ->required();
    sh_cmd->add_option("--resolution", resolution, "grid nodes per axis, 2..256 (default 128)")
        ->capture_default_str();
    sh_cmd->add_option("--padding", padding, "bounding-box padding fraction (default 0.15)")
        ->capture_default_str();
    sh_cmd->add_option("--isovalue", isovalue, "isolevel as a fraction of mu_max (default 0.1)")
        ->capture_default_str();
    add_kernel_flags(sh_cmd);

    // ---- tune ----
    double fraction = 0.1;
    std::vector<std::string> grid_families{"exp", "lorentz"};
    std::vector<double> grid_kappas{0.5, 1.0, 2.0};
    std::vector<double> grid_taus{1.0, 2.0, 6.0};
    auto* tu_cmd = app.add_subcommand("tune", "subsampling-based kernel parameter selection");
    tu_cmd->add_option("--input", input, "input CSV")->required();
    tu_cmd->add_option("--labels", labels_col, "label column name")->required();
    tu_cmd->add_option("--out", out, "output JSON with the selected kernel")->required();
    tu_cmd->add_option("--fraction", fraction, "subsample fraction (default 0.1)")
        ->capture_default_str();
    tu_cmd->add_option("--grid-families", grid_families, "kernel families to try")
        ->capture_default_str();
    tu_cmd->add_option("--grid-kappas", grid_kappas, "kappa values to try")
        ->capture_default_str();
    tu_cmd->add_option("--grid-taus", grid_taus, "tau values to try")->capture_default_str();
    tu_cmd->add_option("--folds", k_folds, "inner cross-validation folds")
        ->capture_default_str();
    tu_cmd->add_option("--k", k_nn, "kNN neighbor count")->capture_default_str();
    tu_cmd->add_option("--n", n_components, "component count")->capture_default_str();
    tu_cmd->add_option("--metric", metric, "feature metric")->capture_default_str();
    tu_cmd->add_option("--cutoff", cutoff, "cutoff policy")->capture_default_str();
    tu_cmd->add_option("--cutoff-s", cutoff_s, "cutoff stddev multiplier")
        ->capture_default_str();

    // ---- cluster-curve ----
    auto* cc_cmd = app.add_subcommand("cluster-curve",
                                      "k-medoids loss versus N, for an elbow read");
    cc_cmd->add_option("--input", input, "input CSV")->required();
    cc_cmd->add_option("--labels", labels_col, "label column to drop");
    cc_cmd->add_option("--out", out, "output CSV (N,loss)")->required();
    cc_cmd->add_option("--n-sweep", n_sweep, "cluster counts, start:stop:step")->required();
    cc_cmd->add_option("--metric", metric, "feature metric")->capture_default_str();
    cc_cmd->add_option("--update-rule", update_rule, "medoid update rule")
        ->capture_default_str();
    cc_cmd->add_flag("--standardize,!--no-standardize", standardize,
                     "standardize features before the metric");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        apply_threads(common);
        json echo{{"seed", common.seed}, {"threads_requested", common.threads}};

        if (fit_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(
                input, labels_col.empty() ? std::nullopt : std::make_optional(labels_col));
            const auto kernel = make_kernel(family, kappa, tau, cutoff, cutoff_s);
            const auto model = ccp::fit(data, n_components, ccp::metric_from_name(metric),
                                        kernel, common.seed, ccp::scheme_from_name(scheme),
                                        update_rule == "center_proxy"
                                            ? ccp::UpdateRule::center_proxy
                                            : ccp::UpdateRule::min_sum,
                                        standardize);
            ccp::save_model(out, out + ".bin", model);
            echo["command"] = "fit";
            echo["input"] = input;
            echo["n"] = n_components;
            echo["metric"] = metric;
            echo["scheme"] = scheme;
            echo["update_rule"] = update_rule;
            echo["standardize"] = standardize;
            echo["kernel"] = ccp::kernel_to_json(kernel);
            write_config_echo(out, echo);
        } else if (tr_cmd->parsed()) {
            const auto model = ccp::load_model(model_path, model_path + ".bin");
            auto [data, labels] = ccp::load_csv(
                input, labels_col.empty() ? std::nullopt : std::make_optional(labels_col));
            ccp::Embedding emb;
            if (transform_kind == "rigidity") {
                emb = ccp::transform(model, data);
            } else if (transform_kind == "centrality") {
                emb = ccp::centrality_project(model, data,
                                              ccp::centrality_from_name(centrality),
                                              rc_fraction);
            } else {
                std::cerr << "unknown projection type: " << transform_kind << '\n';
                return 1;
            }
            ccp::save_embedding_csv(out, emb, labels ? &*labels : nullptr);
            echo["command"] = "transform";
            echo["model"] = model_path;
            echo["input"] = input;
            echo["projection"] = transform_kind;
            echo["centrality"] = centrality;
            echo["rc_fraction"] = rc_fraction;
            write_config_echo(out, echo);
        } else if (ev_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(input, labels_col);
            if (!labels) throw ccp::DataError("eval requires labels");
            ccp::PipelineConfig pipe;
            if (reducer == "none") pipe.reducer.kind = ccp::ReducerConfig::Kind::none;
            else if (reducer == "ccp") pipe.reducer.kind = ccp::ReducerConfig::Kind::ccp;
            else if (reducer == "ccp_centrality")
                pipe.reducer.kind = ccp::ReducerConfig::Kind::ccp_centrality;
            else if (reducer == "pca") pipe.reducer.kind = ccp::ReducerConfig::Kind::pca;
            else {
                std::cerr << "unknown reducer: " << reducer << '\n';
                return 1;
            }
            pipe.reducer.metric = ccp::metric_from_name(metric);
            pipe.reducer.kernel = make_kernel(family, kappa, tau, cutoff, cutoff_s);
            pipe.reducer.scheme = ccp::scheme_from_name(scheme);
            pipe.reducer.update_rule = update_rule == "center_proxy"
                                           ? ccp::UpdateRule::center_proxy
                                           : ccp::UpdateRule::min_sum;
            pipe.reducer.standardize = standardize;
            pipe.reducer.centrality = ccp::centrality_from_name(centrality);
            pipe.reducer.rc_fraction = rc_fraction;
            pipe.k_nn = k_nn;
            pipe.post_scale = post_scale;

            std::vector<std::uint64_t> seeds;
            for (std::size_t s = 0; s < n_seeds; ++s) seeds.push_back(common.seed + s);

            std::ofstream csv(out);
            if (!csv) throw ccp::DataError("cannot write file: " + out);
            csv << "N,mean,sd,failed_folds";
            for (int l = 0; l < labels->num_classes; ++l) csv << ",class" << l;
            csv << '\n';
            char buf[64];
            for (std::size_t N : parse_sweep(n_sweep)) {
                pipe.reducer.n_components = N;
                const auto rep = ccp::cross_validate(data, *labels, pipe, k_folds, seeds);
                csv << N;
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", rep.overall_mean,
                              rep.overall_sd);
                csv << buf << ',' << rep.failed_folds;
                for (double a : rep.per_class_accuracy) {
                    std::snprintf(buf, sizeof buf, ",%.17g", a);
                    csv << buf;
                }
                csv << '\n';
            }
            echo["command"] = "eval";
            echo["input"] = input;
            echo["n_sweep"] = n_sweep;
            echo["k_folds"] = k_folds;
            echo["n_seeds"] = n_seeds;
            echo["pipeline"] = ccp::pipeline_to_json(pipe);
            write_config_echo(out, echo);
        } else if (rs_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(input, labels_col);
            if (!labels) throw ccp::DataError("rs requires labels");
            std::optional<ccp::LabelVector> predicted;
            if (!pred_col.empty()) {
                // reload selecting the predicted column; feature sets must match
                auto [data2, pred] = ccp::load_csv(input, pred_col);
                predicted = std::move(pred);
                // drop the true-label column from the predicted view's features
                (void)data2;
                // rebuild the point matrix without either label column
                std::vector<std::size_t> keep;
                for (std::size_t j = 0; j < data.feature_names.size(); ++j)
                    if (data.feature_names[j] != pred_col) keep.push_back(j);
                ccp::DataMatrix pruned;
                pruned.values = ccp::Matrix(data.samples(), keep.size());
                for (std::size_t r = 0; r < data.samples(); ++r)
                    for (std::size_t c = 0; c < keep.size(); ++c)
                        pruned.values(r, c) = data.values(r, keep[c]);
                for (std::size_t c : keep) pruned.feature_names.push_back(data.feature_names[c]);
                data = std::move(pruned);
            }
            const auto rep = ccp::rs_report(data.values, *labels);
            {
                std::ofstream jout(out + ".json");
                if (!jout) throw ccp::DataError("cannot write file: " + out + ".json");
                jout << ccp::rs_report_to_json(rep).dump(2) << '\n';
            }
            ccp::rs_chart_export(data.values, *labels, predicted ? &*predicted : nullptr,
                                 out + ".csv");
            echo["command"] = "rs";
            echo["input"] = input;
            echo["labels"] = labels_col;
            echo["predicted"] = pred_col;
            write_config_echo(out, echo);
        } else if (sh_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(
                input, labels_col.empty() ? std::nullopt : std::make_optional(labels_col));
            const auto kernel = make_kernel(family, kappa, tau, cutoff, cutoff_s);
            std::optional<int> filter;
            if (class_filter >= 0) {
                if (!labels) throw ccp::DataError("--class requires --labels");
                filter = class_filter;
            }
            const auto grid =
                ccp::rigidity_density(data.values, kernel, {resolution}, padding, filter,
                                      labels ? &*labels : nullptr);
            const auto mesh = ccp::extract_isosurface(grid, isovalue);
            ccp::save_grid_binary(out + ".grid.bin", grid);
            ccp::save_grid_csv(out + ".grid.csv", grid);
            if (grid.n_dims == 3) {
                ccp::save_mesh_obj(out + ".obj", mesh);
            } else {
                ccp::save_contour_csv(out + ".contour.csv", mesh);
            }
            echo["command"] = "shape";
            echo["input"] = input;
            echo["resolution"] = resolution;
            echo["padding"] = padding;
            echo["isovalue"] = isovalue;
            echo["class"] = class_filter;
            echo["kernel"] = ccp::kernel_to_json(kernel);
            write_config_echo(out, echo);
        } else if (tu_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(input, labels_col);
            if (!labels) throw ccp::DataError("tune requires labels");
            ccp::TuneGrid grid;
            for (const auto& f : grid_families)
                grid.families.push_back(ccp::family_from_name(f));
            grid.kappas = grid_kappas;
            grid.taus = grid_taus;
            ccp::TuneProtocol protocol;
            protocol.k_folds = k_folds;
            protocol.k_nn = k_nn;
            protocol.n_components = n_components;
            protocol.metric = ccp::metric_from_name(metric);
            protocol.cutoff = cutoff == "none" ? ccp::CutoffPolicy::none()
                                               : ccp::CutoffPolicy::mean_plus_sd(cutoff_s);
            const auto best =
                ccp::subsample_tune(data, *labels, fraction, common.seed, grid, protocol);
            {
                std::ofstream jout(out);
                if (!jout) throw ccp::DataError("cannot write file: " + out);
                jout << ccp::kernel_to_json(best).dump(2) << '\n';
            }
            echo["command"] = "tune";
            echo["input"] = input;
            echo["fraction"] = fraction;
            echo["k_folds"] = k_folds;
            echo["k_nn"] = k_nn;
            echo["n"] = n_components;
            write_config_echo(out, echo);
        } else if (cc_cmd->parsed()) {
            auto [data, labels] = ccp::load_csv(
                input, labels_col.empty() ? std::nullopt : std::make_optional(labels_col));
            ccp::DataMatrix for_metric = data;
            if (standardize) ccp::standardize_columns(for_metric.values);
            const auto D =
                ccp::feature_distance_matrix(for_metric, ccp::metric_from_name(metric));
            std::ofstream csv(out);
            if (!csv) throw ccp::DataError("cannot write file: " + out);
            csv << "N,loss\n";
            char buf[48];
            for (std::size_t N : parse_sweep(n_sweep)) {
                const auto part = ccp::kmedoids_partition(
                    D, N, common.seed, 300,
                    update_rule == "center_proxy" ? ccp::UpdateRule::center_proxy
                                                  : ccp::UpdateRule::min_sum,
                    &for_metric);
                std::snprintf(buf, sizeof buf, "%.17g", part.loss);
                csv << N << ',' << buf << '\n';
            }
            echo["command"] = "cluster-curve";
            echo["input"] = input;
            echo["n_sweep"] = n_sweep;
            echo["metric"] = metric;
            echo["update_rule"] = update_rule;
            echo["standardize"] = standardize;
            write_config_echo(out, echo);
        }
    } catch (const ccp::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const ccp::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
