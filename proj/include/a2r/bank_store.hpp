#pragma once

#include <filesystem>
#include <map>
#include <tuple>

#include "a2r/ann.hpp"
#include "a2r/bank.hpp"

namespace a2r {

struct IndexedBank {
    MemoryBank bank;
    AnnIndex index;
};

// Banks and their indices keyed by (class, scale).
class BankStore {
public:
    void add(MemoryBank bank, AnnIndex index);
    // Trains the index with `params`.
    void add(MemoryBank bank, const IndexParams& params = {});

    const IndexedBank* find(ClassId class_id, const ScaleSpec& scale) const;
    // Throws an Error naming the (class, scale) pair when absent.
    const IndexedBank& at(ClassId class_id, const ScaleSpec& scale) const;

    std::size_t size() const { return banks_.size(); }
    auto begin() const { return banks_.begin(); }
    auto end() const { return banks_.end(); }

    // Loads every *.a2rb in dir; an index is read from the matching *.a2ri
    // when present and trained with `params` otherwise.
    static BankStore load_dir(const std::filesystem::path& dir, const IndexParams& params = {});
    // Writes <bank>.a2rb and <bank>.a2ri pairs into dir.
    void save_dir(const std::filesystem::path& dir) const;

private:
    using Key = std::tuple<int, int, ClassId>;  // patch size, stride, class
    std::map<Key, IndexedBank> banks_;
};

// Banks for one image and its masks at every scale, with default indices.
BankStore build_store(std::span<const CorpusItem> corpus, std::span<const ScaleSpec> scales,
                      const BankBuildOptions& options = {}, const IndexParams& index_params = {});

}  // namespace a2r
