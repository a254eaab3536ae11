// SPDX-License-Identifier: Apache-2.0
// Command-line front end: run, validate, and list scenario files.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pilotwave/runner.hpp"
#include "pilotwave/scenario.hpp"

namespace fs = std::filesystem;

namespace {

/// Output directory: --out verbatim when given, otherwise
/// <PILOTWAVE_OUT or .>/<scenario name>.
fs::path resolve_out_dir(const std::string& flag, const std::string& name) {
    if (!flag.empty()) return fs::path(flag);
    const char* root = std::getenv("PILOTWAVE_OUT");
    return fs::path(root && *root ? root : ".") / name;
}

int cmd_run(const std::string& file, const std::string& out_flag, bool seed_set,
            std::uint64_t seed, unsigned workers, bool quiet) {
    pilotwave::Scenario s = pilotwave::load_scenario(file);
    pilotwave::RunOptions opt;
    opt.out_dir = resolve_out_dir(out_flag, s.name).string();
    opt.seed_overridden = seed_set;
    opt.seed = seed;
    opt.workers = workers;
    opt.quiet = quiet;

    pilotwave::RunReport rep = pilotwave::run_scenario(s, opt);
    if (!quiet) {
        std::printf("scenario %s (%s), seed %llu\n", rep.scenario.c_str(),
                    pilotwave::experiment_token(rep.experiment),
                    static_cast<unsigned long long>(rep.seed));
        for (const pilotwave::RunCheck& c : rep.checks)
            std::printf("[%s] %-32s value=%.6g bound=%.6g\n", c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.value, c.bound);
        std::printf("%zu output file(s) in %s (%.2fs)\n", rep.outputs.size(),
                    opt.out_dir.c_str(), rep.wall_seconds);
        std::printf("%s\n", rep.ok() ? "ok" : "FAILED");
    }
    return rep.ok() ? 0 : 1;
}

int cmd_validate(const std::string& file, bool quiet) {
    pilotwave::Scenario s = pilotwave::load_scenario(file);
    if (!quiet)
        std::printf("%s: valid (%s, seed %llu)\n", s.name.c_str(),
                    pilotwave::experiment_token(s.experiment),
                    static_cast<unsigned long long>(s.seed));
    return 0;
}

int cmd_catalog(const char* argv0) {
    // Canned scenarios live in the repository's scenarios/ directory; search
    // the working directory first, then relative to the executable (so the
    // build-tree binary finds them too).
    std::vector<fs::path> candidates{"scenarios"};
    std::error_code ec;
    fs::path exe = fs::canonical(fs::path(argv0), ec);
    if (!ec) {
        candidates.push_back(exe.parent_path() / ".." / ".." / "scenarios");
        candidates.push_back(exe.parent_path() / ".." / "scenarios");
    }
    fs::path dir;
    for (const fs::path& c : candidates)
        if (fs::is_directory(c, ec)) {
            dir = c;
            break;
        }
    if (dir.empty()) {
        std::fprintf(stderr, "no scenarios/ directory found\n");
        return 2;
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".scn") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        try {
            pilotwave::Scenario s = pilotwave::load_scenario(f.string());
            std::printf("%-24s %-22s %s\n", s.name.c_str(),
                        pilotwave::experiment_token(s.experiment), f.string().c_str());
        } catch (const pilotwave::Error& e) {
            std::printf("%-24s %-22s %s\n", "(invalid)", e.what(), f.string().c_str());
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pilot-wave dynamics laboratory"};
    app.require_subcommand(1);

    std::string file, out_flag;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool quiet = false;

    CLI::App* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("file", file, "scenario file")->required();
    run->add_option("--out", out_flag, "output directory (default: $PILOTWAVE_OUT/<name>)");
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--workers", workers, "worker threads (0 = hardware)");
    run->add_flag("--quiet", quiet, "suppress progress output");

    CLI::App* validate = app.add_subcommand("validate", "parse a scenario without running");
    validate->add_option("file", file, "scenario file")->required();
    validate->add_flag("--quiet", quiet, "suppress output");

    app.add_subcommand("catalog", "list canned scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(file, out_flag, seed_opt->count() > 0, seed, workers, quiet);
        if (validate->parsed()) return cmd_validate(file, quiet);
        return cmd_catalog(argv[0]);
    } catch (const pilotwave::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
