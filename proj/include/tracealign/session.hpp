#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracealign/config.hpp"
#include "tracealign/dependency_graph.hpp"
#include "tracealign/embedding.hpp"
#include "tracealign/errors.hpp"
#include "tracealign/flow.hpp"
#include "tracealign/gateway.hpp"
#include "tracealign/node_evaluation.hpp"
#include "tracealign/node_pipeline.hpp"
#include "tracealign/segmentation.hpp"
#include "tracealign/trace_model.hpp"

namespace tracealign {

inline constexpr int kSessionSchemaVersion = 1;

class SessionVersionError : public DataError {
 public:
  using DataError::DataError;
};

struct BundleRef {
  std::string path;
  std::string digest;  // sha256 of the trace file bytes
  friend bool operator==(const BundleRef&, const BundleRef&) = default;
};

struct AuditRecord {
  long revision = 0;
  nlohmann::json mutation;
  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

// Computation backends a session needs to apply mutations.
struct Engine {
  std::function<std::shared_ptr<const EmbeddingProvider>(const AnalysisConfig&)> embedder_for;
  std::shared_ptr<const Gateway> gateway;  // may be null: offline fallbacks only
  ProgressFn progress;

  // Memoized hashing embedder keyed by (d, max_chars).
  static Engine local(std::shared_ptr<const Gateway> gateway = nullptr);
};

struct Session {
  int schema_version = kSessionSchemaVersion;
  BundleRef bundle_ref;
  AliasMap aliases;
  TaskInfo task;
  AnalysisConfig initial_config;
  AnalysisConfig config;
  long revision = 0;
  SegmentsByRun segments;
  NodeSet nodes;
  DependencyGraph graph;
  JudgmentMatrix matrix;
  std::optional<SankeyModel> flow;
  std::map<std::string, nlohmann::json> link_analytics;  // by link id and transition id
  std::vector<AuditRecord> audit;

  // Runtime only.
  bool stale = false;
  std::shared_ptr<const TaskBundle> bundle;

  static Session create(const std::string& bundle_path, AliasMap aliases, TaskInfo task, AnalysisConfig config);

  const TaskBundle& require_bundle() const;
  bool evaluated() const { return flow.has_value(); }

  // Persisted fields only.
  friend bool operator==(const Session& a, const Session& b);
};

// Reads and ingests the bundle file; returns digest alongside.
std::pair<std::shared_ptr<const TaskBundle>, std::string> load_bundle(const std::string& path, const AliasMap& aliases,
                                                                      const TaskInfo& task);

// Mutations are JSON objects with a "kind":
//   set_config {config}        extract {}                 refine {actions: [...]}
//   deps_edit {op: add|remove, from, to}                  deps_put {edges: [{from,to}]}
//   deps_import {document}     deps_infer_apply {}        evaluate {}
// Applies atomically, bumps the revision and appends to the audit log.
long apply_mutation(Session& s, const nlohmann::json& mutation, const Engine& engine);

// Rebuilds from the initial state by re-applying the audit log.
Session replay(const Session& s, const Engine& engine);

nlohmann::json session_to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

void save_session(const Session& s, const std::string& path);
// Reloads the bundle; a digest mismatch sets `stale` instead of failing.
Session load_session(const std::string& path);

// Analytics for a link id or transition id, from the cache or computed on demand.
nlohmann::json link_analysis(const Session& s, const std::string& id, const Engine& engine);

}  // namespace tracealign
