#include "tracealign/gateway.hpp"

namespace tracealign {

namespace {

using nlohmann::json;

json string_prop() { return {{"type", "string"}}; }

PromptTemplate segment_summary() {
  return {std::string(templates::kSegmentSummary), 1,
          R"(You are analysing the orchestrator messages of one multi-agent execution run.
The messages below form one contiguous informational state of the run.
Summarize, in one to three sentences, what information the system obtained or
what milestone it reached in this span. Do not speculate beyond the text.

Messages:
{{segment_text}})",
          {{"type", "object"},
           {"required", {"summary"}},
           {"properties", {{"summary", {{"type", "string"}, {"minLength", 1}}}}}}};
}

PromptTemplate dependency_inference() {
  return {std::string(templates::kDependencyInference), 1,
          R"(Task description:
{{task_description}}

Information nodes (JSON list of id, title, description):
{{nodes}}

Propose prerequisite relationships between these nodes. An edge {"from": A, "to": B}
means the information of A is needed before B can be obtained. Use only the ids above
and do not create cycles.)",
          {{"type", "object"},
           {"required", {"edges"}},
           {"properties",
            {{"edges",
              {{"type", "array"},
               {"items",
                {{"type", "object"},
                 {"required", {"from", "to"}},
                 {"properties", {{"from", string_prop()}, {"to", string_prop()}}}}}}}}}}};
}

PromptTemplate node_judgment() {
  return {std::string(templates::kNodeJudgment), 1,
          R"(Task description:
{{task_description}}

You judge whether one run completed an information node.
Node: {{node}}
Dependencies among nodes: {{dependencies}}
Earlier judgments for this run: {{prior_judgments}}

Run {{run_id}} log (step: agent: content):
{{run_log}}

Return status Completed, Recovered (failed at least once, later completed), Failed,
or NotReached, with confidence in [0,1], evidence as [from_step, to_step] intervals
from the log, and a short rationale. Judge pass: {{pass}}.)",
          {{"type", "object"},
           {"required", {"status", "confidence", "evidence", "rationale"}},
           {"properties",
            {{"status", {{"type", "string"}, {"enum", {"Completed", "Recovered", "Failed", "NotReached"}}}},
             {"confidence", {{"type", "number"}, {"minimum", 0.0}, {"maximum", 1.0}}},
             {"evidence",
              {{"type", "array"},
               {"items", {{"type", "array"}, {"minItems", 2}, {"maxItems", 2}, {"items", {{"type", "integer"}}}}}}},
             {"rationale", string_prop()}}}}};
}

PromptTemplate error_analysis() {
  json refs = {{"type", "array"}, {"items", string_prop()}};
  return {std::string(templates::kErrorAnalysis), 1,
          R"(A transition between two information nodes was selected: {{transition}}.
Action segments from runs that failed it (JSON list of ref, run_id, agent_kind, text):
{{failed_segments}}

Action segments from runs that completed it:
{{successful_segments}}

Identify recurring error types (e.g. incomplete script generation, syntax errors,
inappropriate strategy selection). For each, give a short error_type label, a
description, and the refs of representative failed and successful segments.)",
          {{"type", "object"},
           {"required", {"reports"}},
           {"properties",
            {{"reports",
              {{"type", "array"},
               {"items",
                {{"type", "object"},
                 {"required", {"error_type", "description", "failed_examples", "successful_examples"}},
                 {"properties",
                  {{"error_type", {{"type", "string"}, {"minLength", 1}}},
                   {"description", string_prop()},
                   {"failed_examples", refs},
                   {"successful_examples", refs}}}}}}}}}}};
}

PromptTemplate cluster_label() {
  return {std::string(templates::kClusterLabel), 1,
          R"(The following agent action segments were grouped as one recurring context:
{{texts}}

Give a label of at most six words describing the shared behaviour.)",
          {{"type", "object"},
           {"required", {"label"}},
           {"properties", {{"label", {{"type", "string"}, {"minLength", 1}}}}}}};
}

}  // namespace

const PromptRegistry& PromptRegistry::builtin() {
  static const PromptRegistry reg = [] {
    PromptRegistry r;
    r.add(segment_summary());
    r.add(dependency_inference());
    r.add(node_judgment());
    r.add(error_analysis());
    r.add(cluster_label());
    return r;
  }();
  return reg;
}

}  // namespace tracealign
