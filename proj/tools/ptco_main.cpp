// ptco: production-test co-evolution engine.
//
// Pipeline commands (each phase reads and writes plain files, so phases can
// be rerun independently):
//   mine              extract per-method change pairs from a git repository
//   build-kb          embed positive pairs into the vector knowledge base
//   learn-experience  distill identification rules from labeled pairs
//   identify          decide which tests are obsolete
//   update            repair obsolete tests through the validation loop
//   evaluate          compute classification / CSR / TPS / UCR metrics

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <atomic>
#include <memory>
#include <mutex>
#include <thread>
#include <optional>
#include <string>
#include <vector>

#include "ptco/change_mining.hpp"
#include "ptco/change_pair.hpp"
#include "ptco/chat.hpp"
#include "ptco/config.hpp"
#include "ptco/http_providers.hpp"
#include "ptco/identify.hpp"
#include "ptco/knowledge_base.hpp"
#include "ptco/metrics.hpp"
#include "ptco/subprocess.hpp"
#include "ptco/update.hpp"
#include "ptco/validate.hpp"

namespace fs = std::filesystem;
using namespace ptco;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

std::string sample_id_for(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%06zu", index);
    return buf;
}

std::unique_ptr<ChatProvider> make_chat_provider(const RunConfig& config) {
    if (config.chat_provider.rfind("scripted:", 0) == 0) {
        fs::path transcript = config.chat_provider.substr(9);
        if (!fs::exists(transcript))
            throw ConfigError("transcript not found: " + transcript.string());
        return std::make_unique<ScriptedChatProvider>(
            ScriptedChatProvider::from_file(transcript));
    }
    if (config.chat_provider == "http")
        return std::make_unique<HttpChatProvider>(config.chat_endpoint, config.chat_model);
    throw ConfigError("chat.provider must be http or scripted:<file>, got: " +
                      config.chat_provider);
}

std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& config) {
    if (config.embed_provider == "hashing")
        return std::make_unique<HashingEmbeddingProvider>(config.embed_dimension);
    if (config.embed_provider == "http")
        return std::make_unique<HttpEmbeddingProvider>(config.embed_endpoint, config.embed_model);
    throw ConfigError("embed.provider must be hashing or http, got: " + config.embed_provider);
}

std::unique_ptr<ValidationAdapter> make_validator(const RunConfig& config) {
    if (config.adapter_kind == "scripted") {
        if (config.adapter_script.empty())
            throw ConfigError("adapter.kind = scripted needs adapter.script");
        return std::make_unique<ScriptedValidationAdapter>(
            ScriptedValidationAdapter::from_file(config.adapter_script));
    }
    if (config.adapter_kind == "maven") {
        CommandAdapterConfig preset = maven_preset();
        preset.stage_timeout = config.adapter.stage_timeout;
        preset.require_all_lines = config.adapter.require_all_lines;
        if (!config.adapter.report_path.empty()) preset.report_path = config.adapter.report_path;
        return std::make_unique<CommandValidationAdapter>(preset);
    }
    if (config.adapter_kind == "commands") {
        if (config.adapter.compile_cmd.empty())
            throw ConfigError("adapter.kind = commands needs adapter.compile_cmd");
        return std::make_unique<CommandValidationAdapter>(config.adapter);
    }
    throw ConfigError("adapter.kind must be commands, maven or scripted");
}

std::unique_ptr<AuditLog> make_audit(const RunConfig& config) {
    if (config.audit_path.empty()) return nullptr;
    return std::make_unique<AuditLog>(config.audit_path);
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path.string());
}

// Prepares the per-session scratch checkout when a source repository is
// configured. Returns an empty path for purely scripted runs.
fs::path prepare_workspace(const RunConfig& config, const ChangePair& pair,
                           const std::string& sample_id) {
    if (config.workspace_repo.empty()) return {};
    fs::path root = config.workspace_root.empty() ? fs::temp_directory_path() / "ptco_workspaces"
                                                  : config.workspace_root;
    fs::path scratch = root / sample_id;
    fs::remove_all(scratch);
    fs::create_directories(scratch.parent_path());
    CommandResult clone = run_command("git clone --quiet " +
                                      sh_quote(config.workspace_repo.string()) + " " +
                                      sh_quote(scratch.string()));
    if (!clone.ok())
        throw ValidatorSetupError("cannot clone workspace for " + sample_id + ": " + clone.err);
    CommandResult checkout =
        run_command("git -C " + sh_quote(scratch.string()) + " checkout --quiet " +
                    sh_quote(pair.change_p.version));
    if (!checkout.ok())
        throw ValidatorSetupError("cannot checkout " + pair.change_p.version + ": " +
                                  checkout.err);
    return scratch;
}

struct VerdictRecord {
    std::string sample_id;
    PairLabel truth = PairLabel::UNLABELED;
    Decision decision = Decision::NOT_OBSOLETE;
    IdentificationVerdict verdict;
};

void write_verdicts_file(const fs::path& path, const std::vector<VerdictRecord>& records) {
    std::string out;
    for (const VerdictRecord& r : records) {
        json j;
        j["sample_id"] = r.sample_id;
        j["truth"] = to_string(r.truth);
        j.update(verdict_to_json(r.verdict));
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<VerdictRecord> read_verdicts_file(const fs::path& path) {
    std::vector<VerdictRecord> records;
    for (const std::string& line : split_lines(read_file(path))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        VerdictRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.truth = label_from_string(j.at("truth").get<std::string>());
        r.decision = j.at("decision").get<std::string>() == "OBSOLETE" ? Decision::OBSOLETE
                                                                       : Decision::NOT_OBSOLETE;
        r.verdict.decision = r.decision;
        r.verdict.explanation = j.value("explanation", "");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<UpdateSession> read_sessions_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().filename().string().rfind("session_", 0) == 0)
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<UpdateSession> sessions;
    for (const fs::path& f : files)
        sessions.push_back(session_from_json(nlohmann::json::parse(read_file(f))));
    return sessions;
}

// ---- commands --------------------------------------------------------------

int cmd_mine(const fs::path& repo, const std::string& from, const std::string& to,
             const fs::path& out, const std::string& group, const std::string& project,
             const fs::path& label_from) {
    PairingConfig pairing;
    if (!group.empty()) pairing.group = group;
    pairing.project = project;

    MiningResult mined = mine_change_pairs(repo, from, to, pairing);
    for (const std::string& w : mined.warnings) std::cerr << "warning: " << w << "\n";

    if (!label_from.empty()) {
        require_file(label_from, "ground truth file");
        std::size_t applied = apply_labels(mined.pairs, label_from);
        std::cerr << "labels applied to " << applied << " of " << mined.pairs.size()
                  << " pairs\n";
    }

    write_pairs_file(out, mined.pairs);
    std::cout << "mined " << mined.pairs.size() << " change pairs -> " << out.string() << "\n";
    return kExitOk;
}

int cmd_build_kb(const fs::path& pairs_file, const fs::path& out_dir, const RunConfig& config) {
    require_file(pairs_file, "pairs file");
    std::vector<ChangePair> pairs = read_pairs_file(pairs_file);

    std::vector<ChangePair> positives;
    std::size_t filtered = 0;
    for (ChangePair& p : pairs) {
        if (p.label == PairLabel::POSITIVE)
            positives.push_back(std::move(p));
        else
            ++filtered;
    }
    if (filtered > 0)
        std::cerr << "warning: filtered " << filtered << " non-positive samples\n";
    if (positives.empty()) std::cerr << "warning: empty corpus, building an empty store\n";

    auto embedder = make_embedder(config);
    KnowledgeBase kb = KnowledgeBase::build(positives, *embedder, config.block_size);
    kb.save(out_dir);
    std::cout << "knowledge base: " << kb.size() << " entries -> " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_learn_experience(const fs::path& pairs_file, const fs::path& out, int rounds,
                         const RunConfig& config) {
    require_file(pairs_file, "pairs file");
    std::vector<ChangePair> pairs = read_pairs_file(pairs_file);
    auto provider = make_chat_provider(config);
    auto audit = make_audit(config);
    std::vector<Experience> learned =
        learn_experience(pairs, *provider, rounds, config.sampling, audit.get(), out);
    std::cout << "learned " << learned.size() << " experiences -> " << out.string() << "\n";
    return kExitOk;
}

int cmd_identify(const fs::path& pairs_file, const fs::path& experiences_file,
                 const fs::path& out, bool learn_first, int rounds, const RunConfig& config) {
    require_file(pairs_file, "pairs file");
    std::vector<ChangePair> pairs = read_pairs_file(pairs_file);
    auto provider = make_chat_provider(config);
    auto audit = make_audit(config);

    std::vector<Experience> experiences;
    if (learn_first) {
        experiences = learn_experience(pairs, *provider, rounds, config.sampling, audit.get(),
                                       experiences_file);
    } else {
        require_file(experiences_file, "experiences file");
        experiences = read_experiences(experiences_file);
    }

    std::vector<VerdictRecord> records;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const ChangePair& pair = pairs[i];
        VerdictRecord r;
        r.sample_id = sample_id_for(i);
        r.truth = pair.label;
        r.verdict = identify(pair.prod_old, pair.prod_new, pair.test_old, experiences, *provider,
                             config.sampling, audit.get(), config.window_size);
        r.decision = r.verdict.decision;
        records.push_back(std::move(r));
    }
    write_verdicts_file(out, records);

    std::size_t obsolete = 0;
    for (const VerdictRecord& r : records)
        if (r.decision == Decision::OBSOLETE) ++obsolete;
    std::cout << "identified " << obsolete << " of " << records.size() << " tests as obsolete -> "
              << out.string() << "\n";
    return kExitOk;
}

int cmd_update(const fs::path& pairs_file, const fs::path& verdicts_file, const fs::path& kb_dir,
               const fs::path& out_dir, bool force_all, const RunConfig& config) {
    require_file(pairs_file, "pairs file");
    std::vector<ChangePair> pairs = read_pairs_file(pairs_file);

    std::map<std::string, Decision> decisions;
    if (!verdicts_file.empty()) {
        require_file(verdicts_file, "verdicts file");
        for (const VerdictRecord& r : read_verdicts_file(verdicts_file))
            decisions[r.sample_id] = r.decision;
    }

    UpdateOptions options;
    options.max_iterations = config.max_iterations;
    options.zero_shot = config.zero_shot;
    options.retrieval_k = config.retrieval_k;
    options.prompt_budget = config.prompt_budget;
    options.window_size = config.window_size;
    options.params = config.sampling;

    std::optional<KnowledgeBase> kb;
    std::unique_ptr<EmbeddingProvider> embedder;
    if (!options.zero_shot) {
        if (kb_dir.empty()) throw ConfigError("update needs --kb unless zero-shot");
        require_file(kb_dir / "manifest.json", "knowledge base");
        kb = KnowledgeBase::load(kb_dir);
        embedder = make_embedder(config);
    }

    auto provider = make_chat_provider(config);
    auto validator = make_validator(config);
    auto audit = make_audit(config);
    fs::create_directories(out_dir);

    std::vector<std::pair<std::size_t, std::string>> selected;  // (pair index, sample id)
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::string id = sample_id_for(i);
        if (!force_all) {
            if (!decisions.empty()) {
                auto it = decisions.find(id);
                if (it == decisions.end() || it->second != Decision::OBSOLETE) continue;
            } else if (pairs[i].label == PairLabel::NEGATIVE) {
                continue;
            }
        }
        selected.emplace_back(i, id);
    }

    // Scripted doubles replay a shared FIFO; interleaving them across threads
    // would scramble the transcript, so they always run serially.
    std::size_t workers = std::max<std::size_t>(1, config.concurrency);
    bool scripted = config.chat_provider.rfind("scripted:", 0) == 0 ||
                    config.adapter_kind == "scripted";
    if (scripted && workers > 1) {
        std::cerr << "note: scripted providers run sessions serially\n";
        workers = 1;
    }
    workers = std::min(workers, selected.size() ? selected.size() : std::size_t{1});

    std::vector<std::optional<UpdateSession>> results(selected.size());
    std::vector<std::string> skipped;
    std::mutex skip_mutex;
    std::atomic<std::size_t> cursor{0};

    auto worker = [&] {
        for (;;) {
            std::size_t slot = cursor.fetch_add(1);
            if (slot >= selected.size()) return;
            auto [index, id] = selected[slot];
            try {
                fs::path workspace = prepare_workspace(config, pairs[index], id);
                results[slot] = update(pairs[index], kb ? &*kb : nullptr, embedder.get(),
                                       *provider, *validator, workspace, options, audit.get(),
                                       id);
            } catch (const ValidatorSetupError& e) {
                std::lock_guard<std::mutex> lock(skip_mutex);
                skipped.push_back(id);
                std::cerr << "skipped " << id << ": " << e.what() << "\n";
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::vector<UpdateSession> sessions;
    for (std::optional<UpdateSession>& result : results) {
        if (!result) continue;
        write_file_atomic(out_dir / ("session_" + result->sample_id + ".json"),
                          session_to_json(*result).dump(2) + "\n");
        sessions.push_back(std::move(*result));
    }
    std::sort(skipped.begin(), skipped.end());

    json summary;
    summary["sessions"] = sessions.size();
    summary["skipped"] = skipped;
    if (!sessions.empty()) {
        UpdateRates rates = update_metrics(sessions);
        summary["csr"] = optional_to_json(rates.csr());
        summary["tps"] = optional_to_json(rates.tps());
        summary["ucr"] = optional_to_json(rates.ucr());
        std::cout << render_update_table(update_metrics_by_project(sessions));
    } else {
        std::cout << "no sessions were run\n";
    }
    write_file_atomic(out_dir / "update_metrics.json", summary.dump(2) + "\n");
    return kExitOk;
}

int cmd_evaluate(const fs::path& verdicts_file, const fs::path& sessions_dir, const fs::path& out,
                 const std::string& confusion) {
    MetricsReport report;
    json output;

    if (!confusion.empty()) {
        // direct confusion counts: tp,fp,tn,fn
        ConfusionCounts c;
        if (std::sscanf(confusion.c_str(), "%zu,%zu,%zu,%zu", &c.tp, &c.fp, &c.tn, &c.fn) != 4)
            throw ConfigError("--confusion expects tp,fp,tn,fn");
        report = classification_metrics(c);
        output["counts"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    } else {
        if (verdicts_file.empty()) throw ConfigError("evaluate needs --verdicts or --confusion");
        require_file(verdicts_file, "verdicts file");

        std::vector<EvaluatedVerdict> verdicts;
        for (const VerdictRecord& r : read_verdicts_file(verdicts_file))
            verdicts.push_back({r.sample_id, r.truth, r.decision});
        if (verdicts.empty()) throw ConfigError("verdicts file is empty");

        ConfusionCounts counts = counts_from_verdicts(verdicts);
        if (counts.total() > 0) report = classification_metrics(counts);
        output["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn},
                            {"fn", counts.fn}};

        if (!sessions_dir.empty()) {
            require_file(sessions_dir, "sessions directory");
            std::vector<UpdateSession> sessions = read_sessions_dir(sessions_dir);
            if (!sessions.empty()) {
                UpdateRates rates = update_metrics(sessions);
                report.csr = rates.csr();
                report.tps = rates.tps();
                report.ucr = rates.ucr();
                json by_project = json::array();
                for (const auto& [name, row] : update_metrics_by_project(sessions))
                    by_project.push_back({{"project", name},
                                          {"sessions", row.sessions},
                                          {"csr", optional_to_json(row.csr())},
                                          {"tps", optional_to_json(row.tps())},
                                          {"ucr", optional_to_json(row.ucr())}});
                output["by_project"] = by_project;
            }
            report.two_phase_accuracy = two_phase_accuracy(verdicts, sessions);
        }
    }

    output["metrics"] = metrics_to_json(report);
    write_file_atomic(out, output.dump(2) + "\n");

    // aligned plain-text companion
    std::string table;
    auto row = [&](const char* name, const std::optional<double>& v) {
        std::string n = name;
        while (n.size() < 20) n += ' ';
        table += n + metric_cell(v) + "\n";
    };
    row("accuracy", report.accuracy);
    row("precision_pos", report.precision_pos);
    row("recall_pos", report.recall_pos);
    row("f1_pos", report.f1_pos);
    row("precision_neg", report.precision_neg);
    row("recall_neg", report.recall_neg);
    row("f1_neg", report.f1_neg);
    row("csr", report.csr);
    row("tps", report.tps);
    row("ucr", report.ucr);
    row("two_phase_accuracy", report.two_phase_accuracy);
    fs::path table_path = out;
    table_path.replace_extension(".txt");
    write_file_atomic(table_path, table);
    std::cout << table;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"production-test co-evolution engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string provider_override;
    app.add_option("--config", config_path, "run configuration file (key = value lines)");
    app.add_option("--provider", provider_override,
                   "chat provider override: http or scripted:<transcript>");

    // mine
    auto* mine = app.add_subcommand("mine", "mine change pairs from a git repository");
    std::string repo, from, to, group, project;
    std::string mine_out, label_from;
    mine->add_option("--repo", repo, "repository path")->required();
    mine->add_option("--from", from, "range start commit (exclusive)")->required();
    mine->add_option("--to", to, "range end commit (inclusive)")->required();
    mine->add_option("--out", mine_out, "output pairs file (jsonl)")->required();
    mine->add_option("--group", group, "organization name for mined pairs");
    mine->add_option("--project", project, "project name for mined pairs");
    mine->add_option("--label-from", label_from, "ground truth labels (jsonl)");

    // build-kb
    auto* build_kb = app.add_subcommand("build-kb", "build the vector knowledge base");
    std::string kb_pairs, kb_out;
    build_kb->add_option("--pairs", kb_pairs, "pairs file (jsonl)")->required();
    build_kb->add_option("--out", kb_out, "knowledge base directory")->required();

    // learn-experience
    auto* learn = app.add_subcommand("learn-experience", "distill identification experience");
    std::string learn_pairs, learn_out;
    int learn_rounds = 1;
    learn->add_option("--pairs", learn_pairs, "labeled pairs file")->required();
    learn->add_option("--out", learn_out, "experiences file (json)")->required();
    learn->add_option("--rounds", learn_rounds, "refinement rounds");

    // identify
    auto* identify_cmd = app.add_subcommand("identify", "identify obsolete tests");
    std::string id_pairs, id_experiences, id_out;
    bool id_learn = false;
    int id_rounds = 1;
    identify_cmd->add_option("--pairs", id_pairs, "pairs file")->required();
    identify_cmd->add_option("--experiences", id_experiences, "experiences file")->required();
    identify_cmd->add_option("--out", id_out, "verdicts file (jsonl)")->required();
    identify_cmd->add_flag("--experience-learn", id_learn,
                           "learn experiences from the pairs first");
    identify_cmd->add_option("--rounds", id_rounds, "learning rounds with --experience-learn");

    // update
    auto* update_cmd = app.add_subcommand("update", "repair obsolete tests");
    std::string up_pairs, up_verdicts, up_kb, up_out;
    bool up_force = false;
    update_cmd->add_option("--pairs", up_pairs, "pairs file")->required();
    update_cmd->add_option("--verdicts", up_verdicts, "verdicts file (updates OBSOLETE ones)");
    update_cmd->add_option("--kb", up_kb, "knowledge base directory");
    update_cmd->add_option("--out", up_out, "sessions output directory")->required();
    update_cmd->add_flag("--force-all", up_force, "update every pair regardless of verdicts");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "compute evaluation metrics");
    std::string ev_verdicts, ev_sessions, ev_out, ev_confusion;
    evaluate_cmd->add_option("--verdicts", ev_verdicts, "verdicts file");
    evaluate_cmd->add_option("--sessions", ev_sessions, "sessions directory");
    evaluate_cmd->add_option("--out", ev_out, "metrics output file (json)")->required();
    evaluate_cmd->add_option("--confusion", ev_confusion, "direct counts tp,fp,tn,fn");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            require_file(config_path, "config file");
            config = RunConfig::load(config_path);
        }
        if (!provider_override.empty()) config.chat_provider = provider_override;

        if (mine->parsed())
            return cmd_mine(repo, from, to, mine_out, group, project, label_from);
        if (build_kb->parsed()) return cmd_build_kb(kb_pairs, kb_out, config);
        if (learn->parsed()) return cmd_learn_experience(learn_pairs, learn_out, learn_rounds,
                                                         config);
        if (identify_cmd->parsed())
            return cmd_identify(id_pairs, id_experiences, id_out, id_learn, id_rounds, config);
        if (update_cmd->parsed())
            return cmd_update(up_pairs, up_verdicts, up_kb, up_out, up_force, config);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(ev_verdicts, ev_sessions, ev_out, ev_confusion);
        return kExitUsage;
    } catch (const RepoUnreadable& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CommitNotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InsufficientSamples& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
