#include "tracealign/action_analytics.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "tracealign/errors.hpp"
#include "tracealign/node_pipeline.hpp"
#include "tracealign/text.hpp"

namespace tracealign {

std::string ActionSegment::ref() const {
  return run_id + ":" + std::to_string(step_range.from) + "-" + std::to_string(step_range.to);
}

TransitionSelection TransitionSelection::of(const std::vector<const TransitionLink*>& links) {
  if (links.empty()) throw DataError("empty transition selection");
  TransitionSelection sel;
  sel.source = links.front()->source;
  sel.target = links.front()->target;
  std::set<std::string> runs;
  for (const auto* l : links) {
    if (l->source != sel.source || l->target != sel.target) throw DataError("selected links span different transitions");
    runs.insert(l->run_ids.begin(), l->run_ids.end());
  }
  sel.run_ids.assign(runs.begin(), runs.end());
  return sel;
}

bool run_failed_target(const JudgmentMatrix& matrix, const std::string& run_id, const std::string& target) {
  if (target == kEndNode) return false;
  const auto* j = matrix.find(run_id, target);
  return j && j->status == NodeRunStatus::Failed;
}

Interval transition_window(const Run& run, const JudgmentMatrix& matrix, const TransitionSelection& sel) {
  std::int64_t from = std::numeric_limits<std::int64_t>::min();
  if (sel.source != kStartNode) {
    const auto& j = matrix.at(run.run_id, sel.source);
    if (auto last = j.last_evidence_step()) from = *last;
    else from = run.first_step() - 1;
  }
  std::int64_t to = run.last_step();
  if (sel.target != kEndNode) {
    if (auto last = matrix.at(run.run_id, sel.target).last_evidence_step()) to = *last;
  }
  // Open lower bound: the window excludes `from` itself.
  return {from == std::numeric_limits<std::int64_t>::min() ? from : from + 1, to};
}

std::vector<ActionSegment> coalesce(const std::vector<const LogEntry*>& entries, const EmbeddingProvider& embedder) {
  std::vector<ActionSegment> out;
  for (const auto* e : entries) {
    if (!out.empty() && out.back().agent_kind == e->agent_kind) {
      out.back().step_range.to = e->step_index;
      out.back().text += '\n';
      out.back().text += e->content;
    } else {
      out.push_back({e->run_id, e->agent_kind, {e->step_index, e->step_index}, e->content, {}});
    }
  }
  for (auto& s : out) s.embedding = embedder.embed(s.text);
  return out;
}

ActionsByRun collect_transition_actions(const TaskBundle& bundle, const JudgmentMatrix& matrix,
                                        const std::vector<const TransitionLink*>& links,
                                        const EmbeddingProvider& embedder) {
  const auto sel = TransitionSelection::of(links);
  auto stale = [&](const std::string& why) { throw DataError("stale link " + sel.id() + ": " + why); };

  ActionsByRun out;
  for (const auto* link : links) {
    for (const auto& run_id : link->run_ids) {
      const Run* run = bundle.find_run(run_id);
      if (!run) stale("run '" + run_id + "' not in bundle");
      if (sel.source != kStartNode) {
        const auto* sj = matrix.find(run_id, sel.source);
        if (!sj || !sj->reached()) stale("source not reached in run '" + run_id + "'");
      }
      if (sel.target != kEndNode) {
        const auto* tj = matrix.find(run_id, sel.target);
        if (!tj || !tj->reached()) stale("target not reached in run '" + run_id + "'");
        const LinkOutcome expect = tj->status == NodeRunStatus::Completed   ? LinkOutcome::Success
                                   : tj->status == NodeRunStatus::Recovered ? LinkOutcome::Recovered
                                                                            : LinkOutcome::Failure;
        if (expect != link->outcome) stale("outcome no longer matches judgment in run '" + run_id + "'");
      }
      const Interval w = transition_window(*run, matrix, sel);
      std::vector<const LogEntry*> entries;
      if (w.from <= w.to) entries = run->entries_between(w.from, w.to);
      out[run_id] = coalesce(entries, embedder);
    }
  }
  return out;
}

const ActionSegment* find_action(const ActionsByRun& actions, std::string_view ref) {
  auto colon = ref.rfind(':');
  if (colon == std::string_view::npos) return nullptr;
  auto it = actions.find(std::string(ref.substr(0, colon)));
  if (it == actions.end()) return nullptr;
  for (const auto& s : it->second)
    if (s.ref() == ref) return &s;
  return nullptr;
}

std::vector<ContextCluster> cluster_contexts(const ActionsByRun& actions, const JudgmentMatrix& matrix,
                                             const TransitionSelection& sel, const AnalysisConfig& config,
                                             const Gateway* gateway) {
  std::vector<const ActionSegment*> flat;
  for (const auto& [run_id, segs] : actions)
    for (const auto& s : segs) flat.push_back(&s);
  std::vector<std::size_t> order(flat.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Same ordering key as candidate consolidation; every segment has support 1.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (flat[a]->step_range.from != flat[b]->step_range.from) return flat[a]->step_range.from < flat[b]->step_range.from;
    return flat[a]->ref() < flat[b]->ref();
  });
  const auto grouping = greedy_groups(
      order, [&](std::size_t i, std::size_t j) { return cosine(flat[i]->embedding, flat[j]->embedding); },
      config.theta_ctx);

  std::vector<ContextCluster> out;
  for (const auto& group : grouping.groups) {
    ContextCluster c;
    c.id = "ctx" + std::to_string(out.size() + 1);
    std::vector<std::string> texts;
    std::size_t failed = 0;
    for (std::size_t idx : group) {
      c.members.push_back(flat[idx]->ref());
      texts.push_back(flat[idx]->text);
      if (run_failed_target(matrix, flat[idx]->run_id, sel.target)) ++failed;
    }
    c.failure_share = static_cast<double>(failed) / static_cast<double>(group.size());
    if (gateway) {
      try {
        std::vector<std::string> sample(texts.begin(), texts.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(texts.size(), 10)));
        c.label = gateway->complete(templates::kClusterLabel, {{"texts", sample}}).value.at("label").get<std::string>();
      } catch (const GatewayError&) {
      }
    }
    if (c.label.empty()) {
      const auto top = text::top_tokens(texts, 3);
      for (const auto& t : top) c.label += (c.label.empty() ? "" : " ") + t;
      if (c.label.empty()) c.label = "(empty)";
    }
    out.push_back(std::move(c));
  }
  return out;
}

AlignedRows align_sequences(const ActionsByRun& actions, const std::vector<ContextCluster>& clusters) {
  std::map<std::string, std::string> cluster_of;
  for (const auto& c : clusters)
    for (const auto& m : c.members) cluster_of[m] = c.id;
  AlignedRows rows;
  for (const auto& [run_id, segs] : actions) {
    auto& row = rows[run_id];
    for (const auto& s : segs) {
      auto it = cluster_of.find(s.ref());
      row.push_back({s.agent_kind, s.ref(), it == cluster_of.end() ? std::string() : it->second});
    }
  }
  return rows;
}

std::vector<LoopSpan> find_loops(const std::vector<AgentKind>& row, int loop_k) {
  std::vector<LoopSpan> out;
  std::optional<LoopSpan> cur;
  auto close = [&] {
    if (cur && cur->length >= static_cast<std::size_t>(loop_k)) out.push_back(*cur);
    cur.reset();
  };
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] == AgentKind::Orchestrator) continue;
    if (cur && cur->agent_kind == row[i]) {
      cur->last = i;
      ++cur->length;
    } else {
      close();
      cur = LoopSpan{i, i, row[i], 1};
    }
  }
  close();
  return out;
}

namespace {

bool run_succeeded_target(const JudgmentMatrix& matrix, const std::string& run_id, const std::string& target) {
  if (target == kEndNode) return true;
  const auto* j = matrix.find(run_id, target);
  return j && (j->status == NodeRunStatus::Completed || j->status == NodeRunStatus::Recovered);
}

std::vector<AgentKind> kinds_of(const std::vector<AlignedBlock>& row) {
  std::vector<AgentKind> out;
  for (const auto& b : row) out.push_back(b.agent_kind);
  return out;
}

}  // namespace

std::vector<ErrorReport> detect_errors(const TransitionSelection& sel, const JudgmentMatrix& matrix,
                                       const std::vector<ContextCluster>& clusters, const AlignedRows& rows,
                                       const AnalysisConfig& config) {
  std::map<std::string, std::vector<LoopSpan>> loops;
  for (const auto& [run_id, row] : rows)
    if (auto l = find_loops(kinds_of(row), config.loop_k); !l.empty()) loops[run_id] = std::move(l);

  // Shortest successful, loop-free run with at least one block.
  std::optional<std::string> exemplar;
  for (const auto& [run_id, row] : rows) {
    if (row.empty() || loops.contains(run_id) || !run_succeeded_target(matrix, run_id, sel.target)) continue;
    if (!exemplar || row.size() < rows.at(*exemplar).size()) exemplar = run_id;
  }
  std::vector<std::string> exemplar_refs;
  if (exemplar)
    for (const auto& b : rows.at(*exemplar)) exemplar_refs.push_back(b.segment_ref);

  std::vector<ErrorReport> out;
  for (const auto& [run_id, spans] : loops) {
    ErrorReport r;
    r.error_type = "repetitive-loop";
    r.run_id = run_id;
    const auto& row = rows.at(run_id);
    std::size_t longest = 0;
    AgentKind kind = spans.front().agent_kind;
    for (const auto& span : spans) {
      for (std::size_t i = span.first; i <= span.last; ++i)
        if (row[i].agent_kind == span.agent_kind) r.failed_examples.push_back(row[i].segment_ref);
      if (span.length > longest) {
        longest = span.length;
        kind = span.agent_kind;
      }
    }
    r.description = "Run " + run_id + " repeated " + std::string(to_string(kind)) + " actions " +
                    std::to_string(longest) + " times in a row within " + sel.id() + " without changing strategy.";
    r.successful_examples = exemplar_refs;
    out.push_back(std::move(r));
  }

  for (const auto& c : clusters) {
    if (c.members.size() < 2 || c.failure_share < config.failure_share_threshold) continue;
    ErrorReport r;
    r.error_type = "failure-dominant-context";
    r.cluster_id = c.id;
    for (const auto& ref : c.members) {
      const auto run_id = ref.substr(0, ref.rfind(':'));
      if (run_failed_target(matrix, run_id, sel.target)) r.failed_examples.push_back(ref);
      else if (run_succeeded_target(matrix, run_id, sel.target)) r.successful_examples.push_back(ref);
    }
    if (r.successful_examples.empty()) r.successful_examples = exemplar_refs;
    char share[16];
    std::snprintf(share, sizeof share, "%.0f%%", c.failure_share * 100.0);
    r.description = "Context '" + c.label + "' (" + c.id + ") is dominated by failed runs: " + share + " of its " +
                    std::to_string(c.members.size()) + " segments come from runs that failed " + sel.target + ".";
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ErrorReport> analyze_errors(const TransitionSelection& sel, const JudgmentMatrix& matrix,
                                        const ActionsByRun& actions, const std::vector<ContextCluster>& clusters,
                                        const AlignedRows& rows, const AnalysisConfig& config,
                                        const Gateway* gateway) {
  const bool any_failed = std::any_of(sel.run_ids.begin(), sel.run_ids.end(),
                                      [&](const std::string& r) { return run_failed_target(matrix, r, sel.target); });
  if (gateway && any_failed) {
    nlohmann::json failed = nlohmann::json::array(), ok = nlohmann::json::array();
    for (const auto& [run_id, segs] : actions)
      for (const auto& s : segs) {
        nlohmann::json item = {{"ref", s.ref()}, {"run_id", run_id}, {"agent_kind", to_string(s.agent_kind)}, {"text", s.text}};
        if (run_failed_target(matrix, run_id, sel.target)) failed.push_back(item);
        else ok.push_back(item);
      }
    try {
      auto c = gateway->complete(templates::kErrorAnalysis,
                                 {{"transition", sel.id()}, {"failed_segments", failed}, {"successful_segments", ok}});
      std::vector<ErrorReport> out;
      for (const auto& r : c.value.at("reports")) {
        ErrorReport rep;
        rep.error_type = r.at("error_type").get<std::string>();
        rep.description = r.at("description").get<std::string>();
        for (const auto& ref : r.at("failed_examples"))
          if (find_action(actions, ref.get<std::string>())) rep.failed_examples.push_back(ref.get<std::string>());
        for (const auto& ref : r.at("successful_examples"))
          if (find_action(actions, ref.get<std::string>())) rep.successful_examples.push_back(ref.get<std::string>());
        out.push_back(std::move(rep));
      }
      return out;
    } catch (const GatewayError&) {
    }
  }
  return detect_errors(sel, matrix, clusters, rows, config);
}

TransitionAnalysis analyze_transition(const TaskBundle& bundle, const JudgmentMatrix& matrix,
                                      const std::vector<const TransitionLink*>& links, const AnalysisConfig& config,
                                      const EmbeddingProvider& embedder, const Gateway* gateway) {
  TransitionAnalysis a;
  a.selection = TransitionSelection::of(links);
  a.actions = collect_transition_actions(bundle, matrix, links, embedder);
  a.clusters = cluster_contexts(a.actions, matrix, a.selection, config, gateway);
  a.rows = align_sequences(a.actions, a.clusters);
  a.reports = analyze_errors(a.selection, matrix, a.actions, a.clusters, a.rows, config, gateway);
  return a;
}

void to_json(nlohmann::json& j, const ActionSegment& s) {
  j = nlohmann::json{{"ref", s.ref()},
                     {"run_id", s.run_id},
                     {"agent_kind", to_string(s.agent_kind)},
                     {"step_range", {s.step_range.from, s.step_range.to}},
                     {"text", s.text}};
}

void to_json(nlohmann::json& j, const ContextCluster& c) {
  j = nlohmann::json{{"id", c.id}, {"label", c.label}, {"members", c.members}, {"failure_share", c.failure_share}};
}

void to_json(nlohmann::json& j, const AlignedBlock& b) {
  j = nlohmann::json{{"agent_kind", to_string(b.agent_kind)}, {"segment_ref", b.segment_ref}, {"cluster_id", b.cluster_id}};
}

void to_json(nlohmann::json& j, const ErrorReport& r) {
  j = nlohmann::json{{"error_type", r.error_type},
                     {"description", r.description},
                     {"failed_examples", r.failed_examples},
                     {"successful_examples", r.successful_examples}};
  if (r.run_id) j["run_id"] = *r.run_id;
  if (r.cluster_id) j["cluster_id"] = *r.cluster_id;
}

void to_json(nlohmann::json& j, const TransitionAnalysis& a) {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [run, row] : a.rows) rows[run] = row;
  nlohmann::json segs = nlohmann::json::object();
  for (const auto& [run, list] : a.actions) segs[run] = list;
  j = nlohmann::json{{"transition", a.selection.id()},
                     {"source", a.selection.source},
                     {"target", a.selection.target},
                     {"run_ids", a.selection.run_ids},
                     {"segments", segs},
                     {"clusters", a.clusters},
                     {"rows", rows},
                     {"reports", a.reports}};
}

}  // namespace tracealign
