#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace detreg {

struct MalformedTaxonomy : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ClassNode {
    int id = 0;                 // dense, 0-based
    std::string name;
    std::optional<int> parent;  // absent for the root
    double frequency = 0.0;     // corpus occurrence count, >= 0
};

/// Rooted class hierarchy with corpus statistics.
///
/// Node probability is the Resnik estimate: a node's own corpus frequency
/// plus the frequency mass of everything it subsumes, normalised by the
/// total mass. Information content is IC(C) = -log p(C), so IC(root) = 0
/// and IC grows toward rarer, deeper classes. The Lin similarity between
/// two classes is 2*IC(lcs) / (IC(a) + IC(b)), which lands in [0,1].
///
/// Immutable after construction; all queries are read-only and thread-safe.
class Taxonomy {
public:
    static Taxonomy from_nodes(std::vector<ClassNode> nodes) {
        Taxonomy t;
        t.init(std::move(nodes));
        return t;
    }

    std::size_t size() const { return nodes_.size(); }
    int root() const { return root_; }

    const ClassNode& node(int id) const {
        check(id);
        return nodes_[static_cast<std::size_t>(id)];
    }

    bool has_name(const std::string& name) const {
        return name_to_id_.count(name) != 0;
    }

    int id_of(const std::string& name) const {
        auto it = name_to_id_.find(name);
        if (it == name_to_id_.end())
            throw UnknownClass("unknown class name: " + name);
        return it->second;
    }

    const std::vector<int>& children(int id) const {
        check(id);
        return children_[static_cast<std::size_t>(id)];
    }

    /// Sibling leaves share a parent with `id`; `id` itself is excluded.
    std::vector<int> siblings(int id) const {
        check(id);
        std::vector<int> out;
        const auto& parent = nodes_[static_cast<std::size_t>(id)].parent;
        if (!parent) return out;
        for (int c : children(*parent))
            if (c != id) out.push_back(c);
        return out;
    }

    int depth(int id) const {
        check(id);
        return depth_[static_cast<std::size_t>(id)];
    }

    double probability(int id) const {
        check(id);
        return prob_[static_cast<std::size_t>(id)];
    }

    double information_content(int id) const {
        check(id);
        return ic_[static_cast<std::size_t>(id)];
    }

    /// Deepest node that is an ancestor-or-self of both a and b.
    int lowest_common_subsumer(int a, int b) const {
        check(a);
        check(b);
        while (depth(a) > depth(b)) a = *nodes_[static_cast<std::size_t>(a)].parent;
        while (depth(b) > depth(a)) b = *nodes_[static_cast<std::size_t>(b)].parent;
        while (a != b) {
            a = *nodes_[static_cast<std::size_t>(a)].parent;
            b = *nodes_[static_cast<std::size_t>(b)].parent;
        }
        return a;
    }

    /// Lin similarity in [0,1]. Identical classes score 1 even at the root
    /// (where IC = 0 would otherwise give 0/0); distinct classes whose ICs
    /// are both zero score 0.
    double lin_similarity(int a, int b) const {
        check(a);
        check(b);
        if (a == b) return 1.0;
        const double denom = information_content(a) + information_content(b);
        if (denom <= 0.0) return 0.0;
        const double shared = information_content(lowest_common_subsumer(a, b));
        return 2.0 * shared / denom;
    }

    /// True iff anc lies on desc's path to the root; a node subsumes itself.
    bool is_ancestor(int anc, int desc) const {
        check(anc);
        check(desc);
        while (depth(desc) > depth(anc))
            desc = *nodes_[static_cast<std::size_t>(desc)].parent;
        return desc == anc;
    }

private:
    void check(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw UnknownClass("unknown class id: " + std::to_string(id));
    }

    void init(std::vector<ClassNode> nodes) {
        if (nodes.empty()) throw MalformedTaxonomy("taxonomy has no nodes");
        const std::size_t n = nodes.size();
        nodes_.resize(n);
        for (auto& nd : nodes) {
            if (nd.id < 0 || static_cast<std::size_t>(nd.id) >= n)
                throw MalformedTaxonomy("node ids must be dense and 0-based, got id " +
                                        std::to_string(nd.id));
            if (!nodes_[static_cast<std::size_t>(nd.id)].name.empty())
                throw MalformedTaxonomy("duplicate node id " + std::to_string(nd.id));
            if (nd.name.empty())
                throw MalformedTaxonomy("node " + std::to_string(nd.id) + " has empty name");
            if (!(nd.frequency >= 0.0) || !std::isfinite(nd.frequency))
                throw MalformedTaxonomy("node " + std::to_string(nd.id) +
                                        " has negative or non-finite frequency");
            nodes_[static_cast<std::size_t>(nd.id)] = std::move(nd);
        }

        root_ = -1;
        children_.assign(n, {});
        for (const auto& nd : nodes_) {
            if (!nd.parent) {
                if (root_ >= 0) throw MalformedTaxonomy("multiple roots: nodes " +
                                                        std::to_string(root_) + " and " +
                                                        std::to_string(nd.id));
                root_ = nd.id;
            } else {
                if (*nd.parent < 0 || static_cast<std::size_t>(*nd.parent) >= n)
                    throw MalformedTaxonomy("node " + std::to_string(nd.id) +
                                            " has dangling parent " + std::to_string(*nd.parent));
                if (*nd.parent == nd.id)
                    throw MalformedTaxonomy("node " + std::to_string(nd.id) + " is its own parent");
                children_[static_cast<std::size_t>(*nd.parent)].push_back(nd.id);
            }
        }
        if (root_ < 0) throw MalformedTaxonomy("no root node");
        for (auto& c : children_) std::sort(c.begin(), c.end());

        // Depth assignment doubles as the cycle/connectivity check: a BFS from
        // the root must reach every node exactly once.
        depth_.assign(n, -1);
        depth_[static_cast<std::size_t>(root_)] = 0;
        std::vector<int> frontier{root_};
        std::size_t visited = 1;
        while (!frontier.empty()) {
            std::vector<int> next;
            for (int u : frontier) {
                for (int c : children_[static_cast<std::size_t>(u)]) {
                    depth_[static_cast<std::size_t>(c)] = depth_[static_cast<std::size_t>(u)] + 1;
                    ++visited;
                    next.push_back(c);
                }
            }
            frontier = std::move(next);
        }
        if (visited != n)
            throw MalformedTaxonomy("parent links contain a cycle or unreachable nodes");

        // Subtree mass bottom-up (children have strictly larger depth, so a
        // depth-descending sweep is a valid topological order).
        std::vector<int> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return depth_[static_cast<std::size_t>(a)] > depth_[static_cast<std::size_t>(b)];
        });
        std::vector<double> mass(n, 0.0);
        for (int u : order) {
            mass[static_cast<std::size_t>(u)] += nodes_[static_cast<std::size_t>(u)].frequency;
            if (nodes_[static_cast<std::size_t>(u)].parent)
                mass[static_cast<std::size_t>(*nodes_[static_cast<std::size_t>(u)].parent)] +=
                    mass[static_cast<std::size_t>(u)];
        }
        const double total = mass[static_cast<std::size_t>(root_)];
        if (!(total > 0.0))
            throw MalformedTaxonomy("taxonomy has zero total frequency mass");

        prob_.resize(n);
        ic_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mass[i] > 0.0))
                throw MalformedTaxonomy("node " + std::to_string(i) +
                                        " has zero probability mass (p must be in (0,1])");
            prob_[i] = mass[i] / total;
            ic_[i] = prob_[i] >= 1.0 ? 0.0 : -std::log(prob_[i]);
        }

        name_to_id_.reserve(n);
        for (const auto& nd : nodes_) {
            if (!name_to_id_.emplace(nd.name, nd.id).second)
                throw MalformedTaxonomy("duplicate node name: " + nd.name);
        }
    }

    std::vector<ClassNode> nodes_;
    std::vector<std::vector<int>> children_;
    std::vector<int> depth_;
    std::vector<double> prob_;
    std::vector<double> ic_;
    std::unordered_map<std::string, int> name_to_id_;
    int root_ = -1;
};

}  // namespace detreg
