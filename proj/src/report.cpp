#include "tracealign/report.hpp"

#include <cstdio>
#include <sstream>

namespace tracealign {

using nlohmann::json;

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string cell(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else out += c;
  }
  return out;
}

std::string evidence_text(const NodeJudgment& j) {
  if (j.evidence.empty()) return "-";
  std::string out;
  for (const auto& iv : j.evidence) {
    if (!out.empty()) out += ", ";
    out += iv.from == iv.to ? std::to_string(iv.from) : std::to_string(iv.from) + "-" + std::to_string(iv.to);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : sep) + s;
  return out;
}

}  // namespace

DivergenceReport build_report(const Session& s) {
  if (!s.flow) throw DataError("session has not been evaluated; run 'eval' first");
  const auto& bundle = s.require_bundle();
  const auto confirmed = s.nodes.confirmed();
  const auto order = s.matrix.node_ids();
  const auto paths = path_stats(*s.flow);
  std::map<std::string, const InformationNode*> by_id;
  for (const auto* n : confirmed) by_id[n->id] = n;
  auto title_of = [&](const std::string& id) -> std::string {
    auto it = by_id.find(id);
    return it == by_id.end() ? id : it->second->title;
  };

  std::ostringstream md;
  md << "# Divergence report: " << (s.task.task_id.empty() ? "task" : s.task.task_id) << "\n\n";
  if (!s.task.task_description.empty()) md << s.task.task_description << "\n\n";
  if (s.stale) md << "> Warning: the trace file changed since this session was built.\n\n";

  md << "## Runs\n\n| run | entries | input tokens | output tokens | agents | declared outcome |\n"
     << "|---|---|---|---|---|---|\n";
  for (const auto& t : summarize_tokens(bundle)) {
    std::vector<std::string> kinds;
    for (auto k : t.agent_kinds_present) kinds.emplace_back(to_string(k));
    md << "| " << t.run_id << " | " << t.entry_count << " | " << t.input_total << " | " << t.output_total << " | "
       << join(kinds, ", ") << " | " << to_string(bundle.find_run(t.run_id)->declared_outcome) << " |\n";
  }

  md << "\n## Information nodes\n\n";
  for (const auto& id : order) {
    const auto* n = by_id.at(id);
    md << "### " << id << ": " << n->title << "\n\n";
    if (!n->description.empty()) md << n->description << "\n\n";
    const auto preds = s.graph.predecessors(id);
    std::vector<std::string> pred_titles;
    for (const auto& p : preds) pred_titles.push_back(p + " (" + title_of(p) + ")");
    md << "Prerequisites: " << (preds.empty() ? std::string("none") : join(pred_titles, ", ")) << "\n\n";
    const auto& tally = s.flow->tallies.at(id);
    md << "Completed " << tally.completed << ", recovered " << tally.recovered << ", failed " << tally.failed
       << ", not reached " << tally.not_reached << ".\n\n";
    md << "| run | status | confidence | evidence steps | rationale |\n|---|---|---|---|---|\n";
    for (const auto& run : s.matrix.run_ids()) {
      const auto& j = s.matrix.at(run, id);
      md << "| " << run << " | " << to_string(j.status) << " | " << fmt2(j.confidence) << " | " << evidence_text(j)
         << " | " << cell(j.rationale) << " |\n";
    }
    md << "\n";
  }

  md << "## Flow\n\n| link | outcome | weight | runs | dependency violation |\n|---|---|---|---|---|\n";
  for (const auto& l : s.flow->links)
    md << "| " << l.transition_id() << " | " << to_string(l.outcome) << " | " << l.weight() << " | "
       << join(l.run_ids, ", ") << " | " << (l.violates_dependencies ? "yes" : "no") << " |\n";

  md << "\n## Paths\n\n| path | frequency | runs | rare |\n|---|---|---|---|\n";
  for (const auto& p : paths)
    md << "| " << join(p.path, " > ") << " | " << p.frequency << " | " << join(p.run_ids, ", ") << " | "
       << (p.flagged_rare ? "yes" : "no") << " |\n";

  json error_doc = json::object();
  md << "\n## Error analysis\n\n";
  bool any = false;
  std::set<std::string> transitions;
  for (const auto& l : s.flow->links) transitions.insert(l.transition_id());
  for (const auto& t : transitions) {
    auto it = s.link_analytics.find(t);
    if (it == s.link_analytics.end()) continue;
    const auto& reports = it->second.at("reports");
    if (reports.empty()) continue;
    error_doc[t] = reports;
    any = true;
    md << "### " << t << "\n\n";
    for (const auto& r : reports) {
      md << "- **" << r.at("error_type").get<std::string>() << "**: " << r.at("description").get<std::string>() << "\n";
      auto refs = [](const json& a) {
        std::vector<std::string> v;
        for (const auto& x : a) v.push_back(x.get<std::string>());
        return join(v, ", ");
      };
      if (!r.at("failed_examples").empty()) md << "  - failed examples: " << refs(r.at("failed_examples")) << "\n";
      if (!r.at("successful_examples").empty())
        md << "  - successful examples: " << refs(r.at("successful_examples")) << "\n";
    }
    md << "\n";
  }
  if (!any) md << "No recurring errors detected.\n";

  json runs = json::array();
  for (const auto& t : summarize_tokens(bundle)) runs.push_back(t);
  json nodes = json::array();
  for (const auto& id : order) {
    json n = *by_id.at(id);
    n["prerequisites"] = s.graph.predecessors(id);
    n["tally"] = {{"completed", s.flow->tallies.at(id).completed},
                  {"recovered", s.flow->tallies.at(id).recovered},
                  {"failed", s.flow->tallies.at(id).failed},
                  {"not_reached", s.flow->tallies.at(id).not_reached}};
    nodes.push_back(std::move(n));
  }
  DivergenceReport r;
  r.markdown = md.str();
  r.document = json{{"task", {{"task_id", s.task.task_id}, {"task_description", s.task.task_description}}},
                    {"stale", s.stale},
                    {"revision", s.revision},
                    {"runs", runs},
                    {"nodes", nodes},
                    {"matrix", s.matrix},
                    {"flow", *s.flow},
                    {"paths", paths},
                    {"error_reports", error_doc}};
  return r;
}

}  // namespace tracealign
