#include <sweepscope/service.hpp>
#include <sweepscope/sweepscope.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace sweepscope;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override, std::optional<std::size_t> workers)
{
    auto config = load_config(config_path);
    if (!out_override.empty())
        config.output = out_override;
    if (config.output.empty())
        throw InvalidArgument("no output directory (set 'output' or pass --out)");
    SweepOptions opts;
    opts.workers = workers;
    auto out = run_sweep(config, load_input(config.input), opts);
    persist_run(out, config.output);
    std::cout << "iterations: " << out.run.iterations.size() << " of " << config.keys.size() << "\n";
    for (const auto& f : out.failures)
        std::cout << "failed " << f.key << ": " << f.message << "\n";
    if (out.archetypes)
        std::cout << "archetypes: " << out.archetypes->model.n_archetypes() << " at threshold "
                  << out.archetypes->model.threshold << "\n";
    for (const auto& w : out.warnings)
        std::cerr << "warning: " << w << "\n";
    std::cout << "written to " << config.output << "\n";
    return 0;
}

int cmd_serve(const std::string& dir, const std::string& host, int port)
{
    Service svc(dir);
    std::cout << "serving " << dir << " on " << host << ":" << port << std::endl;
    if (!svc.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

int cmd_export_class(const std::string& dir, const std::string& spec)
{
    const auto lr = load_run(dir);
    Json j;
    try {
        j = Json::parse(spec.find('{') != std::string::npos ? spec : read_file(spec));
    } catch (const Json::parse_error& e) {
        throw InvalidArgument(std::string("class spec: ") + e.what());
    }
    const auto id = export_class(dir, lr, parse_class_spec(j));
    std::cout << (fs::path(dir) / "run" / "classes" / (id + ".csv")).string() << "\n";
    return 0;
}

int cmd_recompute(const std::string& dir, int threshold)
{
    RunSession session(load_run(dir));
    auto j = session.set_threshold(threshold);
    const auto lr = session.data();
    update_artifact(dir, "run/archetypes.json", archetypes_json(*session.state()->archetypes, lr->run.iterations.size()).dump(1) + "\n");
    std::cout << "archetypes: " << j["n_archetypes"] << " at threshold " << threshold << "\n";
    return 0;
}

int cmd_generate(const std::string& spec, const std::string& out)
{
    Json j;
    try {
        j = Json::parse(spec.find('{') != std::string::npos ? spec : read_file(spec));
    } catch (const Json::parse_error& e) {
        throw InvalidArgument(std::string("synthetic spec: ") + e.what());
    }
    const auto data = generate(parse_synthetic_spec(j));
    const auto csv = synthetic_to_csv(data);
    if (out.empty() || out == "-")
        std::cout << csv;
    else
        write_file(out, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Parameter-sweep grouping engine"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Execute a sweep and persist its artifacts");
    std::string config_path, out_dir;
    std::size_t workers = 0;
    run->add_option("config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Override the output directory");
    auto* workers_opt = run->add_option("--workers", workers, "Override the worker count")->check(CLI::PositiveNumber);

    auto* serve = app.add_subcommand("serve", "Serve a run directory over HTTP");
    std::string serve_dir, host = "127.0.0.1";
    int port = 8080;
    serve->add_option("dir", serve_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "Bind address");

    auto* exp = app.add_subcommand("export-class", "Write a class attribute CSV");
    std::string exp_dir, exp_spec;
    exp->add_option("dir", exp_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    exp->add_option("spec", exp_spec, "Class spec (inline JSON or file)")->required();

    auto* rec = app.add_subcommand("recompute-archetypes", "Re-run archetype detection at a threshold");
    std::string rec_dir;
    int threshold = 0;
    rec->add_option("dir", rec_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    rec->add_option("--threshold", threshold, "min_cluster_size for the meta-clustering")->required();

    auto* gen = app.add_subcommand("generate", "Write a synthetic table as CSV");
    std::string gen_spec, gen_out;
    gen->add_option("spec", gen_spec, "Synthetic spec (inline JSON or file)")->required();
    gen->add_option("--out", gen_out, "Output CSV (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, out_dir, workers_opt->count() ? std::optional<std::size_t>(workers) : std::nullopt);
        if (serve->parsed())
            return cmd_serve(serve_dir, host, port);
        if (exp->parsed())
            return cmd_export_class(exp_dir, exp_spec);
        if (rec->parsed())
            return cmd_recompute(rec_dir, threshold);
        if (gen->parsed())
            return cmd_generate(gen_spec, gen_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
