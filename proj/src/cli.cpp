#include "tracealign/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tracealign/report.hpp"
#include "tracealign/service.hpp"
#include "tracealign/session.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

using nlohmann::json;

namespace {

struct Options {
  std::string session_path;
  std::optional<double> theta_seg, theta_merge, theta_ctx;
  std::optional<int> loop_k, voting_m;
  std::optional<std::size_t> dimension;
  std::string provider;
  std::string stub_fixtures;
  std::string stub_record;
  std::string alias_map;

  // ingest
  std::string traces;
  std::string task_file, task_id, task_description;
  // refine
  std::string actions_file;
  std::vector<std::string> confirm;
  bool confirm_all = false;
  // deps
  std::string deps_op;
  std::vector<std::string> deps_args;
  // report
  std::string out_prefix;
  // flow
  bool as_json = false;
  // sweep
  double sweep_from = 0.05, sweep_to = 0.95, sweep_step = 0.05;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// A JSON array or one JSON value per line.
json read_json_or_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  try {
    auto j = json::parse(s);
    return j.is_array() ? j : json::array({j});
  } catch (const json::parse_error&) {
  }
  json arr = json::array();
  std::istringstream lines(s);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      arr.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  return arr;
}

AnalysisConfig with_overrides(AnalysisConfig c, const Options& o) {
  if (o.theta_seg) c.theta_seg = *o.theta_seg;
  if (o.theta_merge) c.theta_merge = *o.theta_merge;
  if (o.theta_ctx) c.theta_ctx = *o.theta_ctx;
  if (o.loop_k) c.loop_k = *o.loop_k;
  if (o.voting_m) c.voting_m = *o.voting_m;
  if (o.dimension) c.d = *o.dimension;
  c.validate();
  return c;
}

std::shared_ptr<const Gateway> make_gateway(const Options& o) {
  if (o.provider.empty()) {
    if (o.stub_fixtures.empty()) return nullptr;
  }
  if (o.provider == "remote") {
    auto cfg = GatewayConfig::from_env(ProviderKind::Remote);
    cfg.validate();
    return std::make_shared<Gateway>(cfg, http_chat_transport());
  }
  GatewayConfig cfg;
  cfg.provider = ProviderKind::Stub;
  cfg.stub_fixture_path = o.stub_fixtures;
  cfg.stub_record_path = o.stub_record;
  cfg.validate();
  return std::make_shared<Gateway>(cfg);
}

Session open_session(const Options& o, std::ostream& err) {
  if (o.session_path.empty()) throw CLI::RequiredError("--session");
  with_overrides(AnalysisConfig{}, o);
  Session s = load_session(o.session_path);
  if (s.stale) err << "warning: trace file '" << s.bundle_ref.path << "' changed since the session was saved\n";
  return s;
}

void apply_config_flags(Session& s, const Options& o, const Engine& engine) {
  auto c = with_overrides(s.config, o);
  if (!(c == s.config)) apply_mutation(s, {{"kind", "set_config"}, {"config", c}}, engine);
}

void print_nodes(const Session& s, std::ostream& out) {
  for (const auto& n : s.nodes.nodes()) {
    if (!n.live()) continue;
    out << n.id << '\t' << to_string(n.state) << "\tsupport=" << n.members.size()
        << "\truns=" << distinct_runs(n.members) << '\t' << n.title << '\n';
  }
}

void print_matrix(const Session& s, std::ostream& out) {
  out << "run";
  for (const auto& id : s.matrix.node_ids()) out << '\t' << id;
  out << '\n';
  for (const auto& run : s.matrix.run_ids()) {
    out << run;
    for (const auto& id : s.matrix.node_ids()) out << '\t' << to_string(s.matrix.at(run, id).status);
    out << '\n';
  }
}

int cmd_ingest(const Options& o, std::ostream& out) {
  if (o.session_path.empty()) throw CLI::RequiredError("--session");
  AliasMap aliases;
  if (!o.alias_map.empty()) {
    const auto extra = AliasMap::from_json(read_json_file(o.alias_map)).to_json();
    for (const auto& [name, kind] : extra.items()) aliases.set(name, agent_kind_from_string(kind.get<std::string>()));
  }
  TaskInfo task;
  if (!o.task_file.empty()) {
    auto t = read_json_file(o.task_file);
    task.task_id = t.value("task_id", "");
    task.task_description = t.value("task_description", "");
  }
  if (!o.task_id.empty()) task.task_id = o.task_id;
  if (!o.task_description.empty()) task.task_description = o.task_description;
  Session s = Session::create(o.traces, aliases, task, with_overrides(AnalysisConfig{}, o));
  save_session(s, o.session_path);
  const auto& b = s.require_bundle();
  std::size_t entries = 0;
  for (const auto& r : b.runs) entries += r.entries.size();
  out << "ingested " << b.runs.size() << " runs, " << entries << " entries\n";
  for (const auto& t : summarize_tokens(b))
    out << t.run_id << "\tentries=" << t.entry_count << "\tinput=" << t.input_total << "\toutput=" << t.output_total
        << '\n';
  return kExitOk;
}

int cmd_extract(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  Engine engine = Engine::local(make_gateway(o));
  apply_config_flags(s, o, engine);
  apply_mutation(s, {{"kind", "extract"}}, engine);
  save_session(s, o.session_path);
  print_nodes(s, out);
  return kExitOk;
}

int cmd_refine(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  Engine engine = Engine::local(make_gateway(o));
  json actions = json::array();
  if (!o.actions_file.empty()) actions = read_json_or_jsonl(o.actions_file);
  for (const auto& id : o.confirm) actions.push_back(RefineAction::confirm(id));
  if (o.confirm_all)
    for (const auto& n : s.nodes.nodes())
      if (n.state == NodeState::Candidate) actions.push_back(RefineAction::confirm(n.id));
  if (actions.empty()) throw CLI::ValidationError("refine", "give --actions, --confirm or --confirm-all");
  apply_mutation(s, {{"kind", "refine"}, {"actions", actions}}, engine);
  save_session(s, o.session_path);
  print_nodes(s, out);
  return kExitOk;
}

int cmd_deps(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  Engine engine = Engine::local(make_gateway(o));
  const auto& a = o.deps_args;
  auto need = [&](std::size_t n) {
    if (a.size() != n) throw CLI::ValidationError("deps " + o.deps_op, "expects " + std::to_string(n) + " argument(s)");
  };
  bool changed = true;
  if (o.deps_op == "infer") {
    need(0);
    apply_mutation(s, {{"kind", "deps_infer_apply"}}, engine);
  } else if (o.deps_op == "import") {
    need(1);
    apply_mutation(s, {{"kind", "deps_import"}, {"document", read_json_file(a[0])}}, engine);
  } else if (o.deps_op == "add" || o.deps_op == "remove") {
    need(2);
    apply_mutation(s, {{"kind", "deps_edit"}, {"op", o.deps_op}, {"from", a[0]}, {"to", a[1]}}, engine);
  } else if (o.deps_op == "export") {
    if (a.size() > 1) need(1);
    changed = false;
    const auto doc = export_flow(s.graph, s.nodes.confirmed()).dump(2);
    if (a.empty()) out << doc << '\n';
    else std::ofstream(a[0]) << doc << '\n';
    return kExitOk;
  } else if (o.deps_op == "show") {
    changed = false;
  } else {
    throw CLI::ValidationError("deps", "unknown operation '" + o.deps_op + "'");
  }
  if (changed) save_session(s, o.session_path);
  for (const auto& e : s.graph.edges()) out << e.from << " -> " << e.to << '\t' << to_string(e.origin) << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  Engine engine = Engine::local(make_gateway(o));
  apply_config_flags(s, o, engine);
  if (s.nodes.confirmed().empty()) throw DataError("no confirmed information nodes; confirm nodes with 'refine' first");
  apply_mutation(s, {{"kind", "evaluate"}}, engine);
  save_session(s, o.session_path);
  print_matrix(s, out);
  return kExitOk;
}

int cmd_flow(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  if (!s.flow) throw DataError("session has not been evaluated; run 'eval' first");
  const auto paths = path_stats(*s.flow);
  if (o.as_json) {
    out << json{{"links", s.flow->links}, {"paths", paths}}.dump(2) << '\n';
    return kExitOk;
  }
  for (const auto& p : paths) {
    out << p.frequency << '\t' << p.signature << '\t';
    for (std::size_t i = 0; i < p.run_ids.size(); ++i) out << (i ? "," : "") << p.run_ids[i];
    out << (p.flagged_rare ? "\trare" : "") << '\n';
  }
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  const auto r = build_report(s);
  if (o.out_prefix.empty()) {
    out << r.markdown;
    return kExitOk;
  }
  std::ofstream(o.out_prefix + ".md", std::ios::binary) << r.markdown;
  std::ofstream(o.out_prefix + ".json", std::ios::binary) << r.document.dump(2) << '\n';
  out << "wrote " << o.out_prefix << ".md and " << o.out_prefix << ".json\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  if (o.sweep_step <= 0 || o.sweep_from > o.sweep_to) throw CLI::ValidationError("sweep", "need from <= to and step > 0");
  auto cfg = with_overrides(s.config, o);
  Engine engine = Engine::local();
  auto embedder = engine.embedder_for(cfg);
  out << "theta_seg\tsegments\n";
  const int steps = static_cast<int>(std::floor((o.sweep_to - o.sweep_from) / o.sweep_step + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    cfg.theta_seg = o.sweep_from + i * o.sweep_step;
    cfg.validate();
    std::size_t n = 0;
    for (const auto& [_, v] : segment_bundle(s.require_bundle(), *embedder, cfg)) n += v.size();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", cfg.theta_seg);
    out << buf << '\t' << n << '\n';
  }
  return kExitOk;
}

std::atomic<HttpServer*> g_server{nullptr};

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  Session s = open_session(o, err);
  auto svc = std::make_shared<SessionService>(std::move(s), Engine::local(make_gateway(o)), o.session_path);
  HttpServer server(svc);
  const int port = server.bind(o.host, o.port);
  out << "serving on http://" << o.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (auto* p = g_server.load()) p->stop();
  });
  server.listen();
  g_server = nullptr;
  svc->join_evaluation();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Cross-run diagnosis of orchestrator/worker multi-agent traces", "tracealign"};
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--session", o.session_path, "Session file");
  app.add_option("--theta-seg", o.theta_seg, "Segmentation threshold");
  app.add_option("--theta-merge", o.theta_merge, "Candidate consolidation threshold");
  app.add_option("--theta-ctx", o.theta_ctx, "Context cluster threshold");
  app.add_option("--loop-k", o.loop_k, "Minimum consecutive same-agent blocks for a loop");
  app.add_option("--voting-m", o.voting_m, "Judge passes (odd)");
  app.add_option("--dimension", o.dimension, "Embedding dimension");
  app.add_option("--provider", o.provider, "LLM provider")->check(CLI::IsMember({"remote", "stub"}));
  app.add_option("--stub-fixtures", o.stub_fixtures, "Stub gateway fixture file");
  app.add_option("--stub-record", o.stub_record, "Append missing stub keys to this JSONL file");
  app.add_option("--alias-map", o.alias_map, "agent_name -> agent_kind JSON file");

  auto* ingest = app.add_subcommand("ingest", "Build a session from a trace file");
  ingest->add_option("traces", o.traces, "JSONL trace file")->required();
  ingest->add_option("--task", o.task_file, "JSON file with task_id and task_description");
  ingest->add_option("--task-id", o.task_id);
  ingest->add_option("--task-description", o.task_description);

  auto* extract = app.add_subcommand("extract", "Segment traces and extract candidate nodes");
  auto* refine = app.add_subcommand("refine", "Apply node refinement actions");
  refine->add_option("--actions", o.actions_file, "JSON array or JSONL of actions");
  refine->add_option("--confirm", o.confirm, "Confirm a node id");
  refine->add_flag("--confirm-all", o.confirm_all, "Confirm every candidate");

  auto* deps = app.add_subcommand("deps", "Edit the node dependency graph");
  deps->add_option("op", o.deps_op, "infer | import FILE | export [FILE] | add FROM TO | remove FROM TO | show")
      ->required();
  deps->add_option("args", o.deps_args);

  auto* eval = app.add_subcommand("eval", "Judge every (run, node) pair and build the flow");
  auto* flow = app.add_subcommand("flow", "Print per-run path statistics");
  flow->add_flag("--json", o.as_json);
  auto* report = app.add_subcommand("report", "Emit a markdown and JSON divergence report");
  report->add_option("--out", o.out_prefix, "Write <prefix>.md and <prefix>.json");
  auto* sweep = app.add_subcommand("sweep", "Segment counts across a theta_seg range");
  sweep->add_option("--from", o.sweep_from);
  sweep->add_option("--to", o.sweep_to);
  sweep->add_option("--step", o.sweep_step);
  auto* serve = app.add_subcommand("serve", "Start the HTTP API");
  serve->add_option("--host", o.host);
  serve->add_option("--port", o.port);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o_out, o_err;
    const int code = app.exit(e, o_out, o_err);
    out << o_out.str();
    err << o_err.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o, out);
    if (extract->parsed()) return cmd_extract(o, out, err);
    if (refine->parsed()) return cmd_refine(o, out, err);
    if (deps->parsed()) return cmd_deps(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (flow->parsed()) return cmd_flow(o, out, err);
    if (report->parsed()) return cmd_report(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    if (serve->parsed()) return cmd_serve(o, out, err);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const GatewayError& e) {
    err << "gateway error: " << e.what() << '\n';
    return kExitGateway;
  } catch (const EmbeddingError& e) {
    err << "embedding provider error: " << e.what() << '\n';
    return kExitGateway;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConflictError& e) {
    err << "conflict: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace tracealign
