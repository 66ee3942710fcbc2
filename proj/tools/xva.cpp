#include <CLI11.hpp>

#include <xva/cli.hpp>

int main(int argc, char** argv) {
    CLI::App app{"XVA pricing engine: Monte Carlo, PDE, hedge ledger and legacy comparison"};
    app.require_subcommand(1);

    xva::cli::Options opt;
    std::uint64_t seed = 0;
    for (const char* name : {"mc", "pde", "hedge", "compare"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "run configuration (JSON)")->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", seed, "override engine.seed");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : xva::cli::validation_failure;
    }
    opt.command = app.get_subcommands().front()->get_name();
    if (app.get_subcommands().front()->count("--seed"))
        opt.seed = seed;
    return xva::cli::run(opt);
}
