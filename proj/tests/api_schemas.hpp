#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

// Response contracts of the HTTP API, in the validator's JSON-Schema subset.
namespace api_schemas {

using nlohmann::json;

inline json parse(const char* s) { return json::parse(s); }

inline const json& error() {
  static const json s = parse(R"({"type":"object","required":["error"],"properties":{"error":{"type":"string","minLength":1}}})");
  return s;
}

inline const json& conflict() {
  static const json s = parse(R"({"type":"object","required":["error","current_revision"],
    "properties":{"error":{"type":"string"},"current_revision":{"type":"integer","minimum":0}}})");
  return s;
}

inline json node() {
  return parse(R"({"type":"object","additionalProperties":false,
    "required":["id","title","description","members","support","state","provenance"],
    "properties":{
      "id":{"type":"string","minLength":1},"title":{"type":"string"},"description":{"type":"string"},
      "members":{"type":"array","items":{"type":"object","required":["run_id","index"],
        "properties":{"run_id":{"type":"string"},"index":{"type":"integer","minimum":0}}}},
      "support":{"type":"integer","minimum":0},
      "state":{"enum":["candidate","confirmed","discarded"]},
      "provenance":{"type":"object","required":["origin","parent_ids"],
        "properties":{"origin":{"enum":["auto","manual","merge","split"]},
                      "parent_ids":{"type":"array","items":{"type":"string"}}}}}})");
}

inline json evaluation_status() {
  return parse(R"({"type":"object","required":["state","done","total","base_revision","result_revision"],
    "properties":{"state":{"enum":["idle","running","done","failed"]},
      "done":{"type":"integer","minimum":0},"total":{"type":"integer","minimum":0},
      "base_revision":{"type":"integer"},"result_revision":{"type":["integer","null"]},
      "error":{"type":"string"}}})");
}

inline json dependencies() {
  return parse(R"({"type":"object","required":["revision","nodes","edges","order"],
    "properties":{"revision":{"type":"integer","minimum":0},
      "nodes":{"type":"array","items":{"type":"object","required":["id","title"],
        "properties":{"id":{"type":"string"},"title":{"type":"string"}}}},
      "edges":{"type":"array","items":{"type":"object","required":["from","to","origin"],
        "properties":{"from":{"type":"string"},"to":{"type":"string"},"origin":{"enum":["inferred","manual","imported"]}}}},
      "order":{"type":"array","items":{"type":"string"}}}})");
}

// Keyed by "<METHOD> <route>".
inline const std::map<std::string, json>& endpoints() {
  static const std::map<std::string, json> m = [] {
    std::map<std::string, json> e;
    e["GET /summary"] = parse(R"({"type":"object",
      "required":["revision","task_id","task_description","stale","bundle","config","runs","counts","evaluated"],
      "properties":{"revision":{"type":"integer","minimum":0},
        "task_id":{"type":"string"},"task_description":{"type":"string"},"stale":{"type":"boolean"},
        "bundle":{"type":"object","required":["path","digest"],
          "properties":{"path":{"type":"string"},"digest":{"type":"string","minLength":64}}},
        "config":{"type":"object","required":["d","theta_seg","theta_merge","theta_ctx","loop_k","voting_m"]},
        "runs":{"type":"array","minItems":1,"items":{"type":"object",
          "required":["run_id","input_total","output_total","entry_count","agent_kinds_present","declared_outcome"],
          "properties":{"input_total":{"type":"integer","minimum":0},"output_total":{"type":"integer","minimum":0},
            "entry_count":{"type":"integer","minimum":1},
            "agent_kinds_present":{"type":"array","items":{"enum":["Orchestrator","Web","File","Coder","Terminal","Other"]}},
            "declared_outcome":{"enum":["success","failure","unknown"]}}}},
        "counts":{"type":"object","required":["segments","candidates","confirmed"]},
        "evaluated":{"type":"boolean"}}})");
    e["GET /runs"] = parse(R"({"type":"object","required":["revision","runs"],
      "properties":{"revision":{"type":"integer","minimum":0},
        "runs":{"type":"array","minItems":1,"items":{"type":"object",
          "required":["run_id","entry_count","first_step","last_step","declared_outcome"],
          "properties":{"run_id":{"type":"string"},"entry_count":{"type":"integer","minimum":1},
            "first_step":{"type":"integer"},"last_step":{"type":"integer"},
            "declared_outcome":{"enum":["success","failure","unknown"]}}}}}})");
    e["GET /runs/{id}/log"] = parse(R"({"type":"object","required":["run_id","from","to","entries"],
      "properties":{"run_id":{"type":"string"},"from":{"type":"integer"},"to":{"type":"integer"},
        "entries":{"type":"array","items":{"type":"object",
          "required":["run_id","step_index","agent_name","agent_kind","role","content"],
          "properties":{"step_index":{"type":"integer"},"agent_name":{"type":"string"},
            "agent_kind":{"enum":["Orchestrator","Web","File","Coder","Terminal","Other"]},
            "role":{"enum":["instruction","response","tool_call","tool_result","system"]},
            "content":{"type":"string"},"timestamp":{"type":"string"},
            "token_usage":{"type":"object","required":["input","output"]},
            "metadata":{"type":"object"}}}}}})");

    json nodes = parse(R"({"type":"object","required":["revision","nodes","uncovered"],
      "properties":{"revision":{"type":"integer","minimum":0},"nodes":{"type":"array"},
        "uncovered":{"type":"array","items":{"type":"object","required":["run_id","index"]}}}})");
    nodes["properties"]["nodes"]["items"] = node();
    e["GET /nodes"] = nodes;
    json extract = parse(R"({"type":"object","required":["revision","nodes"],
      "properties":{"revision":{"type":"integer","minimum":0},"nodes":{"type":"array","minItems":1}}})");
    extract["properties"]["nodes"]["items"] = node();
    e["POST /nodes/extract"] = extract;
    json patch = parse(R"({"type":"object","required":["revision","node"],"properties":{"revision":{"type":"integer"}}})");
    patch["properties"]["node"] = node();
    e["PATCH /nodes/{id}"] = patch;
    const json created = parse(R"({"type":"object","required":["revision","created"],
      "properties":{"revision":{"type":"integer"},"created":{"type":"array","minItems":1,"items":{"type":"string"}}}})");
    e["POST /nodes/merge"] = created;
    e["POST /nodes/{id}/split"] = created;
    e["DELETE /nodes/{id}"] = parse(R"({"type":"object","required":["revision"],"properties":{"revision":{"type":"integer"}}})");

    e["GET /dependencies"] = dependencies();
    e["PUT /dependencies"] = dependencies();
    e["POST /dependencies/infer"] = dependencies();

    json status = parse(R"({"type":"object","required":["revision","status"],"properties":{"revision":{"type":"integer"}}})");
    status["properties"]["status"] = evaluation_status();
    e["POST /evaluate"] = status;
    e["GET /evaluate/status"] = status;

    e["GET /matrix"] = parse(R"({"type":"object","required":["revision","run_ids","node_ids","cells"],
      "properties":{"revision":{"type":"integer"},
        "run_ids":{"type":"array","items":{"type":"string"}},
        "node_ids":{"type":"array","items":{"type":"string"}},
        "cells":{"type":"array","minItems":1,"items":{"type":"object",
          "required":["run_id","node_id","status","confidence","evidence","rationale","passes"],
          "properties":{"run_id":{"type":"string"},"node_id":{"type":"string"},
            "status":{"enum":["Completed","Recovered","Failed","NotReached"]},
            "confidence":{"type":"number","minimum":0,"maximum":1},
            "evidence":{"type":"array","items":{"type":"array","items":{"type":"integer"},"minItems":2,"maxItems":2}},
            "rationale":{"type":"string"},"passes":{"type":"integer","minimum":1}}}}}})");

    const json tally = parse(R"({"type":"object","required":["Completed","Recovered","Failed","NotReached"],
      "properties":{"Completed":{"type":"integer","minimum":0},"Recovered":{"type":"integer","minimum":0},
        "Failed":{"type":"integer","minimum":0},"NotReached":{"type":"integer","minimum":0}}})");
    json flow = parse(R"({"type":"object","required":["revision","columns","nodes","links","tallies","paths"],
      "properties":{"revision":{"type":"integer"},
        "columns":{"type":"array","minItems":2,"items":{"type":"string"}},
        "nodes":{"type":"array","items":{"type":"object","required":["id","title"],
          "properties":{"id":{"type":"string"},"title":{"type":"string"}}}},
        "links":{"type":"array","items":{"type":"object",
          "required":["id","transition_id","source","target","outcome","weight","run_ids","violates_dependencies"],
          "properties":{"id":{"type":"string"},"transition_id":{"type":"string"},
            "source":{"type":"string"},"target":{"type":"string"},
            "outcome":{"enum":["success","failure","recovered"]},
            "weight":{"type":"integer","minimum":1},
            "run_ids":{"type":"array","minItems":1,"items":{"type":"string"}},
            "violates_dependencies":{"type":"boolean"}}}},
        "tallies":{"type":"object"},
        "paths":{"type":"object"}}})");
    flow["properties"]["nodes"]["items"]["properties"]["tally"] = tally;
    e["GET /flow"] = flow;
    e["GET /flow/paths"] = parse(R"({"type":"object","required":["revision","paths"],
      "properties":{"revision":{"type":"integer"},
        "paths":{"type":"array","minItems":1,"items":{"type":"object",
          "required":["signature","path","frequency","run_ids","flagged_rare"],
          "properties":{"signature":{"type":"string"},"path":{"type":"array","items":{"type":"string"}},
            "frequency":{"type":"integer","minimum":1},"run_ids":{"type":"array","items":{"type":"string"}},
            "flagged_rare":{"type":"boolean"}}}}}})");
    e["GET /flow/links/{id}/actions"] = parse(R"({"type":"object",
      "required":["revision","link","run_ids","segments","rows","clusters"],
      "properties":{"revision":{"type":"integer"},"link":{"type":"string"},
        "run_ids":{"type":"array","minItems":1,"items":{"type":"string"}},
        "segments":{"type":"object"},"rows":{"type":"object"},
        "clusters":{"type":"array","items":{"type":"object","required":["id","label","members","failure_share"],
          "properties":{"id":{"type":"string"},"label":{"type":"string","minLength":1},
            "members":{"type":"array","minItems":1,"items":{"type":"string"}},
            "failure_share":{"type":"number","minimum":0,"maximum":1}}}}}})");
    e["GET /flow/links/{id}/errors"] = parse(R"({"type":"object","required":["revision","link","reports"],
      "properties":{"revision":{"type":"integer"},"link":{"type":"string"},
        "reports":{"type":"array","items":{"type":"object",
          "required":["error_type","description","failed_examples","successful_examples"],
          "properties":{"error_type":{"type":"string","minLength":1},"description":{"type":"string"},
            "failed_examples":{"type":"array","items":{"type":"string"}},
            "successful_examples":{"type":"array","items":{"type":"string"}},
            "run_id":{"type":"string"},"cluster_id":{"type":"string"}}}}}})");
    return e;
  }();
  return m;
}

}  // namespace api_schemas
