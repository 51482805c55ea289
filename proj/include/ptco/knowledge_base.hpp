#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/change_pair.hpp"
#include "ptco/embed.hpp"
#include "ptco/errors.hpp"
#include "ptco/io.hpp"
#include "ptco/tokenize.hpp"

namespace ptco {

// An embedded production-code diff linked to its paired test-code diff.
struct KnowledgeEntry {
    std::string entry_id;
    std::string prod_diff_text;
    std::string test_diff_text;
    EmbeddingVector vector;  // mean of the entry's block vectors
    struct Origin {
        std::string group;
        std::string project;
        std::string version;
    } origin;
};

struct RetrievalHit {
    const KnowledgeEntry* entry;
    double similarity;
};

class KnowledgeBase {
public:
    static constexpr std::size_t kDefaultBlockSize = 50;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t dimension() const { return dimension_; }
    std::size_t block_size() const { return block_size_; }
    const std::string& embedder_id() const { return embedder_id_; }
    const std::vector<KnowledgeEntry>& entries() const { return entries_; }

    // Embeds a diff text the same way entries are embedded: tokenize into
    // blocks, embed each block, average.
    static EmbeddingVector embed_diff_text(const std::string& diff_text,
                                           EmbeddingProvider& embedder,
                                           std::size_t block_size) {
        std::vector<TokenBlock> blocks = tokenize_diff(diff_text, block_size);
        if (blocks.empty()) throw ZeroVector("diff text produced no tokens");
        std::vector<std::string> block_texts;
        block_texts.reserve(blocks.size());
        for (const TokenBlock& b : blocks) {
            std::string text;
            for (std::size_t i = 0; i < b.tokens.size(); ++i) {
                if (i) text += ' ';
                text += b.tokens[i];
            }
            block_texts.push_back(std::move(text));
        }
        std::vector<EmbeddingVector> vectors = embed_with_retry(embedder, block_texts);
        return mean_vector(vectors);
    }

    static KnowledgeBase build(const std::vector<ChangePair>& pairs, EmbeddingProvider& embedder,
                               std::size_t block_size = kDefaultBlockSize) {
        KnowledgeBase kb;
        kb.block_size_ = block_size;
        kb.embedder_id_ = embedder.id();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const ChangePair& pair = pairs[i];
            if (pair.label != PairLabel::POSITIVE)
                throw Error("knowledge base admits only POSITIVE samples");
            KnowledgeEntry entry;
            entry.entry_id = format_entry_id(i);
            entry.prod_diff_text = pair.prod_diff_text();
            entry.test_diff_text = pair.test_diff_text();
            entry.origin = {pair.group, pair.project, pair.change_p.version};
            entry.vector = embed_diff_text(entry.prod_diff_text, embedder, block_size);
            if (kb.dimension_ == 0)
                kb.dimension_ = entry.vector.dimension();
            else if (entry.vector.dimension() != kb.dimension_)
                throw DimensionMismatch("embedder returned inconsistent dimensions");
            kb.entries_.push_back(std::move(entry));
        }
        return kb;
    }

    // Exact cosine search over all entries; ties break by ascending entry_id.
    std::vector<RetrievalHit> retrieve(const std::string& query_diff_text,
                                       EmbeddingProvider& embedder, std::size_t k = 1) const {
        if (entries_.empty()) throw EmptyStore("knowledge base is empty");
        if (k < 1) throw Error("k must be >= 1");
        if (embedder.id() != embedder_id_)
            throw Error("embedder mismatch: store built with " + embedder_id_ + ", queried with " +
                        embedder.id());
        EmbeddingVector query = embed_diff_text(query_diff_text, embedder, block_size_);
        std::vector<RetrievalHit> hits;
        hits.reserve(entries_.size());
        for (const KnowledgeEntry& e : entries_)
            hits.push_back({&e, cosine_similarity(query, e.vector)});
        std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.entry->entry_id < b.entry->entry_id;
        });
        if (hits.size() > k) hits.resize(k);
        return hits;
    }

    // Store layout: entries.jsonl + vectors.f32 (row-major little-endian
    // 32-bit floats, row i = entry i) + manifest.json.
    void save(const std::filesystem::path& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);

        std::string entries_text;
        for (const KnowledgeEntry& e : entries_) {
            json j{{"entry_id", e.entry_id},
                   {"prod_diff_text", e.prod_diff_text},
                   {"test_diff_text", e.test_diff_text},
                   {"origin",
                    {{"group", e.origin.group},
                     {"project", e.origin.project},
                     {"version", e.origin.version}}}};
            entries_text += j.dump();
            entries_text += '\n';
        }
        write_file_atomic(dir / "entries.jsonl", entries_text);

        // vectors are held in double precision in memory; the store format is
        // row-major little-endian float32
        std::string blob;
        blob.resize(entries_.size() * dimension_ * sizeof(float));
        char* dst = blob.data();
        for (const KnowledgeEntry& e : entries_) {
            for (std::size_t d = 0; d < dimension_; ++d) {
                float f = static_cast<float>(e.vector.values[d]);
                std::memcpy(dst, &f, sizeof(float));
                dst += sizeof(float);
            }
        }
        write_file_atomic(dir / "vectors.f32", blob);

        json manifest{{"dimension", dimension_},
                      {"block_size", block_size_},
                      {"embedder", embedder_id_},
                      {"count", entries_.size()}};
        write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    }

    static KnowledgeBase load(const std::filesystem::path& dir) {
        KnowledgeBase kb;
        json manifest = json::parse(read_file(dir / "manifest.json"));
        kb.dimension_ = manifest.at("dimension").get<std::size_t>();
        kb.block_size_ = manifest.at("block_size").get<std::size_t>();
        kb.embedder_id_ = manifest.at("embedder").get<std::string>();
        std::size_t count = manifest.at("count").get<std::size_t>();

        for (const std::string& line : split_lines(read_file(dir / "entries.jsonl"))) {
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            KnowledgeEntry e;
            e.entry_id = j.at("entry_id").get<std::string>();
            e.prod_diff_text = j.at("prod_diff_text").get<std::string>();
            e.test_diff_text = j.at("test_diff_text").get<std::string>();
            e.origin.group = j.at("origin").at("group").get<std::string>();
            e.origin.project = j.at("origin").at("project").get<std::string>();
            e.origin.version = j.at("origin").at("version").get<std::string>();
            kb.entries_.push_back(std::move(e));
        }
        if (kb.entries_.size() != count)
            throw Error("knowledge base manifest count does not match entries.jsonl");

        std::string blob = read_file(dir / "vectors.f32");
        if (blob.size() != count * kb.dimension_ * sizeof(float))
            throw Error("vectors.f32 size does not match manifest");
        const char* src = blob.data();
        for (KnowledgeEntry& e : kb.entries_) {
            e.vector.values.resize(kb.dimension_);
            for (std::size_t d = 0; d < kb.dimension_; ++d) {
                float f;
                std::memcpy(&f, src, sizeof(float));
                e.vector.values[d] = f;
                src += sizeof(float);
            }
        }
        return kb;
    }

private:
    static std::string format_entry_id(std::size_t index) {
        std::string digits = std::to_string(index);
        return "e" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
    }

    static std::vector<EmbeddingVector> embed_with_retry(EmbeddingProvider& embedder,
                                                         const std::vector<std::string>& texts) {
        constexpr int kMaxAttempts = 3;
        for (int attempt = 1;; ++attempt) {
            try {
                return embedder.embed(texts);
            } catch (const EmbeddingProviderError&) {
                if (attempt == kMaxAttempts) throw;
            }
        }
    }

    std::size_t dimension_ = 0;
    std::size_t block_size_ = kDefaultBlockSize;
    std::string embedder_id_;
    std::vector<KnowledgeEntry> entries_;
};

}  // namespace ptco
