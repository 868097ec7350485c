#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cloudsplit/cloudsplit.hpp"

namespace fs = std::filesystem;
using namespace cloudsplit;

namespace {

struct Options {
    std::string config;
    std::string manifest;
    std::string keystore;
    std::string level = "secret";
    std::string ops = "none";
    std::optional<std::uint64_t> seed;
    bool human = false;
};

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, ByteView data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
}

fs::path config_path(const Options& o) {
    if (!o.config.empty()) return o.config;
    if (const char* env = std::getenv("CLOUDSPLIT_CONFIG"); env && *env) return env;
    fail(ErrorCode::ConfigError, "no config given (--config or CLOUDSPLIT_CONFIG)");
}

// Everything a router needs, opened from the config on disk.
struct Session {
    config::Config cfg;
    simcloud::SimCloud cloud;
    std::unique_ptr<persistence::ManifestStore> manifest;
    std::unique_ptr<persistence::KeyStore> keystore;
    std::unique_ptr<router::Router> router;

    explicit Session(const Options& o) {
        cfg = config::load_config(config_path(o));
        cloud = scenario::make_cloud(cfg, true, cfg.base_dir / "sim");
        const fs::path m = !o.manifest.empty() ? fs::path(o.manifest) : cfg.manifest.value_or(cfg.base_dir / "manifest.cmf");
        const fs::path k = !o.keystore.empty() ? fs::path(o.keystore) : cfg.keystore.value_or(cfg.base_dir / "keystore.cks");
        manifest = std::make_unique<persistence::ManifestStore>(m);
        keystore = std::make_unique<persistence::KeyStore>(k);
        router = std::make_unique<router::Router>(cfg.policy, cloud.endpoints(), config::provider_profiles(cfg), *manifest,
                                                  *keystore, o.seed, cfg.credential);
    }
};

std::vector<std::vector<std::string>> parse_groups(const std::string& s) {
    std::vector<std::vector<std::string>> out;
    if (s.empty()) return out;
    for (const auto& g : config::split(s, ';')) out.push_back(config::split(g, ','));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"cloudsplit: route data to local, dispersed, encrypted or anonymized multi-cloud storage"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", o.config, "policy config file (fallback: CLOUDSPLIT_CONFIG)");
    app.add_option("--manifest", o.manifest, "manifest store path");
    app.add_option("--keystore", o.keystore, "keystore path");
    app.add_option("--seed", o.seed, "derive all randomness from this seed");
    app.add_flag("--human", o.human, "aligned table instead of key=value lines");
    const auto levels = CLI::IsMember({"top-secret", "secret", "unclassified"});
    const auto op_classes = CLI::IsMember({"none", "basic", "advanced"});

    std::string put_path, put_id;
    auto* put = app.add_subcommand("put", "store a file");
    put->add_option("path", put_path, "input file")->required();
    put->add_option("--id", put_id, "object id (default: file name)");
    put->add_option("--level", o.level, "secret level")->check(levels);
    put->add_option("--ops", o.ops, "operation class")->check(op_classes);

    std::string get_id, get_out;
    auto* get = app.add_subcommand("get", "restore an object");
    get->add_option("object_id", get_id)->required();
    get->add_option("-o,--out", get_out, "output file");

    std::string audit_id;
    std::size_t audit_rounds = 1;
    auto* audit = app.add_subcommand("audit", "challenge stored columns with precomputed tokens");
    audit->add_option("object_id", audit_id)->required();
    audit->add_option("--rounds", audit_rounds, "challenge rounds to spend")->check(CLI::PositiveNumber);

    std::string rank_profiles;
    std::vector<double> rank_weights;
    auto* rank = app.add_subcommand("rank", "rank providers by weighted score");
    rank->add_option("--profiles", rank_profiles, "config file holding provider profiles (default: --config)");
    rank->add_option("--weights", rank_weights, "time,cost,security,privacy")->delimiter(',')->expected(4);

    std::string anon_path, anon_id, anon_ids, anon_groups;
    auto* anon = app.add_subcommand("anonymize", "store a CSV table with hashed identifiers and split columns");
    anon->add_option("path", anon_path, "CSV table")->required();
    anon->add_option("--id", anon_id, "object id (default: file name)");
    anon->add_option("--id-columns", anon_ids, "comma-separated identifier columns")->required();
    anon->add_option("--groups", anon_groups, "column groups, e.g. 'age,zip;salary' (default: one per column)");
    anon->add_option("--level", o.level, "secret level")->check(levels);
    anon->add_option("--ops", o.ops, "operation class")->check(op_classes);

    std::string sim_path;
    auto* sim = app.add_subcommand("simulate", "run a scenario against in-memory providers");
    sim->add_option("scenario", sim_path, "scenario file (config format with step lines)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << "error=Usage\n";
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        report::Report out;
        int code = 0;
        if (*put) {
            const fs::path p(put_path);
            auto obj = router::DataObject::binary(put_id.empty() ? p.filename().string() : put_id, read_file(p),
                                                  parse_level(o.level), parse_ops(o.ops));
            Session s(o);
            out = report::put_report(s.router->put(obj));
        } else if (*get) {
            Session s(o);
            const auto obj = s.router->get(get_id);
            out = report::get_report(obj, s.manifest->lookup(get_id));
            if (!get_out.empty()) {
                if (obj.kind == ObjectKind::Table) write_file(get_out, as_bytes(csv::render(obj.table)));
                else write_file(get_out, obj.payload);
                out.add("out", get_out);
            }
        } else if (*audit) {
            Session s(o);
            const auto a = s.router->audit(audit_id, audit_rounds);
            out = report::audit_report(a);
        } else if (*rank) {
            const fs::path p = rank_profiles.empty() ? config_path(o) : fs::path(rank_profiles);
            const auto cfg = config::load_config(p);
            const auto w = rank_weights.empty()
                               ? cfg.policy.weights
                               : ranking::Weights::make(rank_weights[0], rank_weights[1], rank_weights[2], rank_weights[3]);
            out = report::rank_report(ranking::rank_providers(config::provider_profiles(cfg), w), w);
        } else if (*anon) {
            const fs::path p(anon_path);
            const auto text = read_file(p);
            auto table = csv::parse(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
            auto obj = router::DataObject::tabular(anon_id.empty() ? p.filename().string() : anon_id, std::move(table),
                                                   config::split(anon_ids, ','), parse_groups(anon_groups),
                                                   parse_level(o.level), parse_ops(o.ops));
            Session s(o);
            out = report::put_report(s.router->put(obj));
        } else if (*sim) {
            const auto cfg = config::load_config(sim_path);
            auto result = scenario::run_scenario(cfg, o.seed.value_or(1));
            out = std::move(result.report);
            code = result.passed ? 0 : 1;
        }
        std::cout << out.render(o.human);
        return code;
    } catch (const Error& e) {
        std::cout << report::error_report(e).render(false);
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cout << "error=IoError\n";
        std::cerr << e.what() << "\n";
        return 1;
    }
}
