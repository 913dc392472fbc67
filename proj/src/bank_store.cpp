#include "a2r/bank_store.hpp"

#include <set>

#include "a2r/error.hpp"

namespace a2r {

namespace fs = std::filesystem;

void BankStore::add(MemoryBank bank, AnnIndex index) {
    index.check_bound_to(bank);
    Key key{bank.scale().patch_size, bank.scale().stride, bank.class_id()};
    if (banks_.count(key))
        throw Error("duplicate bank for class " + std::to_string(bank.class_id()) + " at scale " + bank.scale().to_string());
    banks_.emplace(key, IndexedBank{std::move(bank), std::move(index)});
}

void BankStore::add(MemoryBank bank, const IndexParams& params) {
    AnnIndex index = AnnIndex::train(bank, params);
    add(std::move(bank), std::move(index));
}

const IndexedBank* BankStore::find(ClassId class_id, const ScaleSpec& scale) const {
    auto it = banks_.find(Key{scale.patch_size, scale.stride, class_id});
    return it == banks_.end() ? nullptr : &it->second;
}

const IndexedBank& BankStore::at(ClassId class_id, const ScaleSpec& scale) const {
    if (const auto* b = find(class_id, scale)) return *b;
    throw Error("missing memory bank for class " + std::to_string(class_id) + " at scale " + scale.to_string());
}

BankStore BankStore::load_dir(const fs::path& dir, const IndexParams& params) {
    if (!fs::is_directory(dir)) throw Error("bank directory not found: " + dir.string());
    std::set<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".a2rb") files.insert(e.path());
    if (files.empty()) throw Error("no .a2rb banks in " + dir.string());
    BankStore store;
    for (const auto& f : files) {
        MemoryBank bank = MemoryBank::load(f);
        const auto ip = index_path_for(f);
        if (fs::exists(ip)) {
            AnnIndex index = AnnIndex::load(ip);
            store.add(std::move(bank), std::move(index));
        } else {
            store.add(std::move(bank), params);
        }
    }
    return store;
}

void BankStore::save_dir(const fs::path& dir) const {
    fs::create_directories(dir);
    std::set<std::string> names;
    for (const auto& [key, ib] : banks_) {
        const auto name = bank_file_name(ib.bank.class_id(), ib.bank.scale());
        if (!names.insert(name).second)
            throw Error("two scales share patch size " + std::to_string(ib.bank.scale().patch_size) + "; cannot store both in one directory");
        const auto path = dir / name;
        ib.bank.save(path);
        ib.index.save(index_path_for(path));
    }
}

BankStore build_store(std::span<const CorpusItem> corpus, std::span<const ScaleSpec> scales,
                      const BankBuildOptions& options, const IndexParams& index_params) {
    BankStore store;
    for (const auto& s : scales)
        for (auto& [c, bank] : build_banks(corpus, s, options)) store.add(std::move(bank), index_params);
    return store;
}

}  // namespace a2r
