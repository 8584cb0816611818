#include <jamcap/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <thread>

namespace {

enum exit_code : int
{
  exit_ok = 0,
  exit_internal = 1,
  exit_usage = 2,
  exit_config = 3,
  exit_parameter = 4,
  exit_io = 5,
  exit_construction = 6,
  exit_bounds = 7,
  exit_schedule_invalid = 8,
  exit_partial_failure = 9,
};

int
code_for(const jamcap::error& e)
{
  const std::string_view c = e.category();
  if (c == "usage") return exit_usage;
  if (c == "config") return exit_config;
  if (c == "parameter") return exit_parameter;
  if (c == "io") return exit_io;
  if (c == "construction") return exit_construction;
  if (c == "bounds") return exit_bounds;
  return exit_internal;
}

struct experiment_options
{
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t parallel = 0;
  bool force = false;
};

void
add_experiment_options(CLI::App& cmd, experiment_options& o, bool config_required)
{
  auto* c = cmd.add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  if (config_required) c->required();
  cmd.add_option("--out", o.out, "output directory")->required();
  cmd.add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd.add_option("--parallel", o.parallel, "worker threads (0: hardware concurrency)");
  cmd.add_flag("--force", o.force, "overwrite an existing output directory");
}

int
run_experiment_command(std::optional<jamcap::experiment_kind> kind, const experiment_options& o)
{
  using namespace jamcap;
  json doc = o.config.empty() ? json::object() : read_json_file(o.config);
  if (o.seed) doc["seed"] = *o.seed;
  const auto base = o.config.empty() ? std::filesystem::path{} : std::filesystem::path{o.config}.parent_path();
  const auto spec = parse_spec(doc, kind, base);

  if (std::filesystem::exists(o.out) && !o.force)
    throw usage_error{"output directory " + o.out + " already exists (use --force to overwrite)"};

  const auto threads = o.parallel ? o.parallel : std::max(1u, std::thread::hardware_concurrency());
  std::cerr << "jamcap " << to_string(spec.kind) << ": " << plan_runs(spec).size() << " run(s), seed " << spec.seed
            << ", " << threads << " thread(s)\n";
  const auto result = run_experiment(spec, threads);
  write_outputs(result, o.out, o.force);

  const auto failed = failed_runs(result);
  std::cerr << "wrote " << o.out << " (" << result.runs.size() - failed << " ok, " << failed << " failed)\n";
  return failed ? exit_partial_failure : exit_ok;
}

int
validate_schedule_command(const std::string& path, std::optional<std::uint64_t> t_prime, std::optional<double> delta)
{
  using namespace jamcap;
  const auto schedule = schedule_from_json(read_json_file(path));
  const auto tp = t_prime ? t_prime : schedule.params.t_prime;
  if (!tp) throw usage_error{"the schedule has no T'; pass --t-prime"};
  const double d = delta.value_or(schedule.params.delta);
  const auto check = validate_bounded(schedule, *tp, d);

  json out = {{"valid", check.ok}, {"t_prime", *tp}, {"delta", d}, {"horizon", schedule.horizon}, {"rows", schedule.rows.size()}};
  if (check.first_violation)
  {
    const auto& v = *check.first_violation;
    out["first_violation"] = {{"row", v.row}, {"start", v.start}, {"length", v.length}, {"jammed", v.jammed}};
  }
  std::cout << out.dump(2) << '\n';
  return check.ok ? exit_ok : exit_schedule_invalid;
}

struct opt_options
{
  std::string network;
  std::string oracle = "exact";
  std::size_t cap = jamcap::default_exact_cap;
  std::string semantics = "single";
  std::string model = "conflict-graph";
};

int
opt_command(const opt_options& o)
{
  using namespace jamcap;
  sim_config c;
  c.network = network_from_json(read_json_file(o.network));
  c.network.validate();
  c.semantics = parse_enum<receiver_semantics>("--semantics", o.semantics);
  c.model = parse_enum<success_model>("--model", o.model);
  c.exact_cap = o.cap;
  const auto kind = parse_enum<oracle_kind>("--oracle", o.oracle);
  if (kind == oracle_kind::none) throw usage_error{"--oracle must be exact or greedy"};
  if (c.semantics == receiver_semantics::single && !c.network.single_receiver())
    throw usage_error{"--semantics single does not fit a network with multi-receiver links"};

  optimum_oracle oracle{c, kind};
  const double value = oracle(std::vector<std::uint8_t>(c.network.size(), 1));
  std::cout << json{ {"links", c.network.size()}, {"oracle", to_string(kind)}, {"model", to_string(c.model)}
                   , {"semantics", to_string(c.semantics)}, {"opt", value} }.dump(2)
            << '\n';
  return exit_ok;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"jamcap: capacity maximization under jamming"};
  app.require_subcommand(1);

  experiment_options run_opts, fig1_opts, fig2_opts;
  auto* run = app.add_subcommand("run", "run the experiment described by a config (its \"experiment\" key picks the kind)");
  add_experiment_options(*run, run_opts, true);
  auto* fig1 = app.add_subcommand("fig1", "successes against the optimum over time, global and individual jamming");
  add_experiment_options(*fig1, fig1_opts, false);
  auto* fig2 = app.add_subcommand("fig2", "throughput for a range of assumed delta");
  add_experiment_options(*fig2, fig2_opts, false);

  std::string schedule_path;
  std::optional<std::uint64_t> t_prime;
  std::optional<double> delta;
  auto* vs = app.add_subcommand("validate-schedule", "check a jamming schedule against the bounded constraint");
  vs->add_option("--schedule", schedule_path, "schedule JSON")->required()->check(CLI::ExistingFile);
  vs->add_option("--t-prime", t_prime, "window length (default: the schedule's)");
  vs->add_option("--delta", delta, "unjammed fraction (default: the schedule's)");

  opt_options opt_opts;
  auto* opt = app.add_subcommand("opt", "single-slot optimum of a network");
  opt->add_option("--network", opt_opts.network, "network JSON")->required()->check(CLI::ExistingFile);
  opt->add_option("--oracle", opt_opts.oracle, "exact or greedy");
  opt->add_option("--cap", opt_opts.cap, "largest n the exact conflict-graph oracle accepts");
  opt->add_option("--semantics", opt_opts.semantics, "single, to-one, to-all or to-many");
  opt->add_option("--model", opt_opts.model, "conflict-graph or sinr");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  try
  {
    if (*run) return run_experiment_command(std::nullopt, run_opts);
    if (*fig1) return run_experiment_command(jamcap::experiment_kind::fig1, fig1_opts);
    if (*fig2) return run_experiment_command(jamcap::experiment_kind::fig2, fig2_opts);
    if (*vs) return validate_schedule_command(schedule_path, t_prime, delta);
    if (*opt) return opt_command(opt_opts);
  }
  catch (const jamcap::error& e)
  {
    std::cerr << "error (" << e.category() << "): " << e.what() << '\n';
    return code_for(e);
  }
  catch (const std::exception& e)
  {
    std::cerr << "internal error: " << e.what() << '\n';
    return exit_internal;
  }
  return exit_internal;
}
