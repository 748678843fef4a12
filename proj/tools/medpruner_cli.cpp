// Command-line front-end: full pruning runs, slice filtering, ablations,
// tau sweeps, baseline comparisons, and synthetic input generation.
//
// Exit codes: 0 success, 1 validation error (bad flags or parameter ranges),
// 2 I/O or file-format error. Diagnostics go to stderr; machine-readable
// output goes to --out files or stdout.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "medpruner/medpruner.hpp"

namespace {

using namespace medpruner;

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct CommonFlags {
    std::string volume_path;
    std::string attention_path;
    PruneConfig cfg;

    void attach(CLI::App* cmd, bool with_attention = true) {
        cmd->add_option("--volume", volume_path, "input volume (.mprv)")->required();
        if (with_attention)
            cmd->add_option("--attention", attention_path,
                            "external per-slice Q/K file (.mpra); omit to use the toy encoder");
        cmd->add_option("--gamma", cfg.gamma, "slice-filter sensitivity threshold");
        cmd->add_option("--tau", cfg.tau, "information threshold in (0, 1]");
        cmd->add_option("--temperature", cfg.temperature, "softmax temperature");
        cmd->add_option("--contextual-ratio", cfg.contextual_ratio,
                        "fraction of redundant tokens kept as cluster centers");
        cmd->add_option("--patch-size", cfg.patch_size, "patch edge length (divides H and W)");
        cmd->add_option("--heads", cfg.num_heads, "toy encoder head count");
        cmd->add_option("--head-dim", cfg.head_dim, "toy encoder head dimension");
    }

    Volume load_volume() const { return read_volume(volume_path); }

    std::optional<std::vector<HeadStack>> load_attention() const {
        if (attention_path.empty()) return std::nullopt;
        return read_attention(attention_path);
    }

    PruneConfig config() const {
        PruneConfig out = cfg;
        out.embed_dim = cfg.patch_size * cfg.patch_size;
        return out;
    }
};

int run_prune(const CommonFlags& flags, const std::string& out_path) {
    const Volume vol = flags.load_volume();
    const auto attention = flags.load_attention();
    const PruneResult res =
        prune_volume(vol, flags.config(), attention ? &*attention : nullptr);
    write_result_json(res, out_path);
    std::cerr << "retained " << res.retained_tokens << " of " << res.original_tokens
              << " tokens (r_rate " << fmt12(res.r_rate) << ") across "
              << res.slice_selection.retained.size() << " of " << vol.depth << " slices\n";
    return 0;
}

int run_slices(const CommonFlags& flags) {
    const Volume vol = flags.load_volume();
    const SliceSelection sel = iaf_filter(vol, flags.cfg.gamma);
    nlohmann::ordered_json j = sel.retained;
    std::cout << j.dump() << '\n';
    return 0;
}

int run_ablate(const CommonFlags& flags) {
    const Volume vol = flags.load_volume();
    const auto attention = flags.load_attention();
    const std::vector<AblationRow> rows =
        run_ablation(vol, flags.config(), attention ? &*attention : nullptr);
    nlohmann::ordered_json variants = nlohmann::ordered_json::array();
    for (const AblationRow& r : rows)
        variants.push_back({{"variant", r.variant},
                            {"r_rate", detail::round_sig12(r.r_rate)},
                            {"retained_slices", r.retained_slices},
                            {"retained_tokens", r.retained_tokens}});
    nlohmann::ordered_json j;
    j["variants"] = variants;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_sweep(const CommonFlags& flags, const std::string& taus_arg) {
    std::vector<double> taus;
    std::size_t pos = 0;
    while (pos <= taus_arg.size()) {
        const std::size_t comma = taus_arg.find(',', pos);
        const std::string part =
            taus_arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            const double tau = std::stod(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
            taus.push_back(tau);
        } catch (const std::exception&) {
            throw ValidationError("--taus: cannot parse \"" + part + "\" as a number");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (taus.empty()) throw ValidationError("--taus: at least one value required");

    const Volume vol = flags.load_volume();
    const auto attention = flags.load_attention();
    const std::vector<SweepPoint> points =
        tau_sweep(vol, flags.config(), attention ? &*attention : nullptr, taus);
    std::cout << "tau,r_rate,mean_mass\n";
    for (const SweepPoint& p : points)
        std::cout << fmt12(p.tau) << ',' << fmt12(p.r_rate) << ',' << fmt12(p.mean_mass) << '\n';
    return 0;
}

int run_compare(const CommonFlags& flags, double ratio) {
    const Volume vol = flags.load_volume();
    const auto attention = flags.load_attention();
    const std::vector<CompareRow> rows =
        compare_methods(vol, flags.config(), attention ? &*attention : nullptr, ratio);
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const CompareRow& r : rows)
        methods.push_back({{"method", r.method},
                           {"r_rate", detail::round_sig12(r.r_rate)},
                           {"mean_mass", detail::round_sig12(r.mean_mass)}});
    nlohmann::ordered_json j;
    j["methods"] = methods;
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive two-stage token pruning for 3D volumes"};
    app.require_subcommand(1);

    CommonFlags prune_flags;
    std::string prune_out;
    CLI::App* prune_cmd = app.add_subcommand("prune", "run the full pruning pipeline");
    prune_flags.attach(prune_cmd);
    prune_cmd->add_option("--out", prune_out, "result JSON path")->required();

    CommonFlags slices_flags;
    CLI::App* slices_cmd =
        app.add_subcommand("slices", "slice filtering only; prints retained indices");
    slices_flags.attach(slices_cmd, /*with_attention=*/false);

    CommonFlags ablate_flags;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "evaluate the stage-combination variants");
    ablate_flags.attach(ablate_cmd);

    CommonFlags sweep_flags;
    std::string taus_arg;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "token stage across a list of taus (CSV)");
    sweep_flags.attach(sweep_cmd);
    sweep_cmd->add_option("--taus", taus_arg, "comma-separated tau values")->required();

    CommonFlags compare_flags;
    double compare_ratio = 0.25;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "adaptive pipeline vs fixed-ratio and uniform baselines");
    compare_flags.attach(compare_cmd);
    compare_cmd->add_option("--ratio", compare_ratio, "token/slice budget for the baselines")
        ->required();

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic inputs");
    synth_cmd->require_subcommand(1);

    struct {
        std::uint32_t depth = 16, height = 32, width = 32, block = 4;
        double delta = 0.1;
        std::string out;
    } step_args;
    CLI::App* step_cmd = synth_cmd->add_subcommand("step", "staircase volume (.mprv)");
    step_cmd->add_option("--depth", step_args.depth, "slice count");
    step_cmd->add_option("--height", step_args.height, "slice height");
    step_cmd->add_option("--width", step_args.width, "slice width");
    step_cmd->add_option("--block", step_args.block, "slices per step");
    step_cmd->add_option("--delta", step_args.delta, "value jump between steps");
    step_cmd->add_option("--out", step_args.out, "output path")->required();

    struct {
        std::uint32_t depth = 16, height = 32, width = 32, center = 8;
        double radius = 4.0, amplitude = 0.5;
        std::string out;
    } lesion_args;
    CLI::App* lesion_cmd = synth_cmd->add_subcommand("lesion", "spherical-bump volume (.mprv)");
    lesion_cmd->add_option("--depth", lesion_args.depth, "slice count");
    lesion_cmd->add_option("--height", lesion_args.height, "slice height");
    lesion_cmd->add_option("--width", lesion_args.width, "slice width");
    lesion_cmd->add_option("--center", lesion_args.center, "center slice index");
    lesion_cmd->add_option("--radius", lesion_args.radius, "bump radius in voxels");
    lesion_cmd->add_option("--amplitude", lesion_args.amplitude, "bump peak above background");
    lesion_cmd->add_option("--out", lesion_args.out, "output path")->required();

    struct {
        std::uint32_t slices = 16, tokens = 256, head_dim = 16, dominant = 0;
        double gap = 20.0;
        std::string out;
    } skew_args;
    CLI::App* skew_cmd =
        synth_cmd->add_subcommand("skewed-attn", "single-dominant-token attention (.mpra)");
    skew_cmd->add_option("--slices", skew_args.slices, "slice block count");
    skew_cmd->add_option("--tokens", skew_args.tokens, "tokens per slice");
    skew_cmd->add_option("--head-dim", skew_args.head_dim, "head dimension");
    skew_cmd->add_option("--dominant", skew_args.dominant, "dominant token index");
    skew_cmd->add_option("--gap", skew_args.gap, "attention logit gap");
    skew_cmd->add_option("--out", skew_args.out, "output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the offending flag to stderr
        return 1;
    }

    try {
        if (*prune_cmd) return run_prune(prune_flags, prune_out);
        if (*slices_cmd) return run_slices(slices_flags);
        if (*ablate_cmd) return run_ablate(ablate_flags);
        if (*sweep_cmd) return run_sweep(sweep_flags, taus_arg);
        if (*compare_cmd) return run_compare(compare_flags, compare_ratio);
        if (*step_cmd) {
            write_volume(make_step_volume(step_args.depth, step_args.height, step_args.width,
                                          step_args.block, step_args.delta),
                         step_args.out);
            return 0;
        }
        if (*lesion_cmd) {
            write_volume(make_lesion_volume(lesion_args.depth, lesion_args.height,
                                            lesion_args.width, lesion_args.center,
                                            lesion_args.radius, lesion_args.amplitude),
                         lesion_args.out);
            return 0;
        }
        if (*skew_cmd) {
            std::vector<HeadStack> stacks(
                skew_args.slices, make_skewed_headstack(skew_args.tokens, skew_args.head_dim,
                                                        skew_args.dominant, skew_args.gap));
            write_attention(stacks, skew_args.out);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const FileError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
