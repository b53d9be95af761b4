"""Turn validated triples into an ontology graph.

Synonym groups (relation "synonym of") are merged with union-find; each group
gets one canonical name (highest mention count, ties broken lexicographically)
and the remaining members become the node's synonym list. Every triple
endpoint is rewritten to its canonical, duplicates and self-loops are dropped,
and each concept node is wired to its top concept with an "is a" edge.

All term identity here is in normalized (casefolded, trimmed) space, so
"Melting Point" and "melting point" are the same concept.

Exports are deterministic: identical graphs yield byte-identical scripts. The
Cypher exporter emits its own escaped literals instead of passing anything to
a model, so the output is replayable and injection-safe.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from xml.etree import ElementTree as ET

from .corpus import (
    CONCEPT_PRIORITY,
    HIERARCHY_RELATION,
    SYNONYM_RELATION,
    TopConcept,
    Triple,
)
from .evaluate import normalize

TOP_NODE_LABEL = "TopConcept"


class OntologyError(Exception):
    pass


@dataclass(frozen=True)
class ConceptNode:
    canonical: str
    synonyms: tuple[str, ...]
    concept_type: TopConcept
    support: int

    def __post_init__(self):
        if self.canonical in self.synonyms:
            raise OntologyError(f"canonical {self.canonical!r} repeated in its synonyms")
        if len(set(self.synonyms)) != len(self.synonyms):
            raise OntologyError(f"duplicate synonyms on node {self.canonical!r}")


@dataclass(frozen=True)
class GraphEdge:
    source: str
    target: str
    relation: str
    kind: str  # "extracted" or "is_a"


@dataclass
class OntologyGraph:
    nodes: list[ConceptNode]
    edges: list[GraphEdge]

    @property
    def top_names(self) -> list[str]:
        return [c.value for c in TopConcept]

    def validate(self) -> None:
        names: set[str] = set(self.top_names)
        for node in self.nodes:
            for name in (node.canonical, *node.synonyms):
                if name in names:
                    raise OntologyError(f"name {name!r} appears on more than one node")
                names.add(name)
        node_names = {n.canonical for n in self.nodes} | set(self.top_names)
        seen_edges: set[tuple[str, str, str]] = set()
        is_a_count = {n.canonical: 0 for n in self.nodes}
        for edge in self.edges:
            if edge.source not in node_names or edge.target not in node_names:
                raise OntologyError(
                    f"edge ({edge.source!r} -> {edge.target!r}) references a missing node"
                )
            if edge.source == edge.target:
                raise OntologyError(f"self-loop on {edge.source!r}")
            key = (edge.source, edge.target, edge.relation)
            if key in seen_edges:
                raise OntologyError(f"duplicate edge {key}")
            seen_edges.add(key)
            if edge.kind == "is_a" and edge.source in is_a_count:
                is_a_count[edge.source] += 1
        for canonical, count in is_a_count.items():
            if count != 1:
                raise OntologyError(
                    f"node {canonical!r} has {count} hierarchy edges, expected exactly 1"
                )


# --- relation name sanitization ----------------------------------------------


@dataclass(frozen=True)
class RelationName:
    original: str
    sanitized: str


def sanitize_relation(original: str) -> RelationName:
    """Uppercase identifier form for use as a graph edge type."""
    cleaned = re.sub(r"[^0-9A-Za-z]+", "_", original.upper())
    cleaned = re.sub(r"_+", "_", cleaned).strip("_")
    if not cleaned:
        cleaned = "REL"
    elif not cleaned[0].isalpha():
        cleaned = "REL_" + cleaned
    return RelationName(original=original, sanitized=cleaned)


# --- consolidation ------------------------------------------------------------


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self):
        self.parent: dict[str, str] = {}
        self.size: dict[str, int] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for member in self.parent:
            out.setdefault(self.find(member), []).append(member)
        return out


@dataclass
class ConsolidationResult:
    nodes: list[ConceptNode]
    triples: list[Triple]
    warnings: list[str]


def _resolve_concept(
    members: list[str], term_concepts: dict[str, TopConcept], warnings: list[str]
) -> TopConcept | None:
    present = [term_concepts[m] for m in members if m in term_concepts]
    if not present:
        return None
    distinct = set(present)
    if len(distinct) > 1:
        warnings.append(
            "synonym group "
            + "/".join(sorted(members))
            + " mixes concepts "
            + ", ".join(sorted(c.value for c in distinct))
        )
        tally: dict[TopConcept, int] = {}
        for c in present:
            tally[c] = tally.get(c, 0) + 1
        best = max(tally.values())
        tied = [c for c, n in tally.items() if n == best]
        for c in CONCEPT_PRIORITY:
            if c in tied:
                return c
    return present[0]


def consolidate(
    triples: list[Triple],
    term_concepts: dict[str, TopConcept],
    fallback_concept: TopConcept | None = None,
) -> ConsolidationResult:
    """Merge synonyms, pick canonicals, rewrite triple endpoints.

    ``term_concepts`` maps term surfaces (any casing) to their top concept.
    Terms with no mapping anywhere in their group raise unless a
    ``fallback_concept`` is supplied.
    """
    concepts = {normalize(k): v for k, v in term_concepts.items()}
    warnings: list[str] = []

    support: dict[str, int] = {}
    uf = UnionFind()
    for t in triples:
        s, o = normalize(t.subject), normalize(t.object)
        if not s or not o:
            warnings.append(f"triple ({t.subject!r}, {t.object!r}) skipped: empty after normalization")
            continue
        support[s] = support.get(s, 0) + 1
        support[o] = support.get(o, 0) + 1
        uf.find(s)
        uf.find(o)
        if normalize(t.relation) == SYNONYM_RELATION:
            uf.union(s, o)

    canonical_of: dict[str, str] = {}
    nodes: list[ConceptNode] = []
    for _, members in sorted(uf.groups().items(), key=lambda kv: min(kv[1])):
        members_sorted = sorted(members, key=lambda m: (-support[m], m))
        canonical = members_sorted[0]
        for member in members:
            canonical_of[member] = canonical
        concept = _resolve_concept(members, concepts, warnings)
        if concept is None:
            if fallback_concept is None:
                raise OntologyError(
                    f"no top concept known for term {canonical!r} "
                    "(supply term concepts or a fallback concept)"
                )
            warnings.append(f"term {canonical!r} has no known concept; using fallback")
            concept = fallback_concept
        nodes.append(
            ConceptNode(
                canonical=canonical,
                synonyms=tuple(sorted(m for m in members if m != canonical)),
                concept_type=concept,
                support=sum(support[m] for m in members),
            )
        )

    rewritten: list[Triple] = []
    seen: set[tuple[str, str, str]] = set()
    for t in triples:
        relation = normalize(t.relation)
        if relation == SYNONYM_RELATION:
            continue
        s, o = normalize(t.subject), normalize(t.object)
        if not s or not o:
            continue
        s, o = canonical_of[s], canonical_of[o]
        if s == o:
            warnings.append(f"self-loop ({s!r}, {relation!r}) dropped after consolidation")
            continue
        key = (s, o, relation)
        if key in seen:
            continue
        seen.add(key)
        rewritten.append(Triple(s, o, relation, source_doc=t.source_doc))

    nodes.sort(key=lambda n: n.canonical)
    return ConsolidationResult(nodes=nodes, triples=rewritten, warnings=warnings)


def build_graph(nodes: list[ConceptNode], edges: list[Triple]) -> OntologyGraph:
    """Assemble the validated graph: six top nodes, one "is a" edge per node."""
    graph_edges = [
        GraphEdge(t.subject, t.object, t.relation, kind="extracted") for t in edges
    ]
    for node in sorted(nodes, key=lambda n: n.canonical):
        graph_edges.append(
            GraphEdge(node.canonical, node.concept_type.value, HIERARCHY_RELATION, kind="is_a")
        )
    graph = OntologyGraph(nodes=sorted(nodes, key=lambda n: n.canonical), edges=graph_edges)
    graph.validate()
    return graph


# --- exports ------------------------------------------------------------------


def _cypher_literal(value: str) -> str:
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _cypher_list(values) -> str:
    return "[" + ", ".join(_cypher_literal(v) for v in values) + "]"


def export_cypher(g: OntologyGraph) -> str:
    """Idempotent MERGE script; one statement per node and per edge."""
    g.validate()
    lines: list[str] = []
    for top in g.top_names:
        lines.append(f"MERGE (n:`{TOP_NODE_LABEL}` {{name: {_cypher_literal(top)}}});")
    for node in sorted(g.nodes, key=lambda n: n.canonical):
        lines.append(
            f"MERGE (n:`{node.concept_type.value}` {{name: {_cypher_literal(node.canonical)}}}) "
            f"SET n.synonyms = {_cypher_list(node.synonyms)}, n.support = {node.support};"
        )
    for edge in sorted(g.edges, key=lambda e: (e.kind, e.source, e.target, e.relation)):
        relation = sanitize_relation(edge.relation)
        lines.append(
            f"MATCH (a {{name: {_cypher_literal(edge.source)}}}) "
            f"MATCH (b {{name: {_cypher_literal(edge.target)}}}) "
            f"MERGE (a)-[r:{relation.sanitized}]->(b) "
            f"SET r.original_name = {_cypher_literal(relation.original)};"
        )
    return "\n".join(lines) + "\n"


def export_graphml(g: OntologyGraph) -> str:
    g.validate()
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    keys = [
        ("d_label", "node", "label", "string"),
        ("d_synonyms", "node", "synonyms", "string"),
        ("d_support", "node", "support", "int"),
        ("d_relation", "edge", "relation", "string"),
        ("d_kind", "edge", "kind", "string"),
    ]
    for key_id, target, name, kind in keys:
        ET.SubElement(
            root, "key", id=key_id, attrib={"for": target, "attr.name": name, "attr.type": kind}
        )
    graph = ET.SubElement(root, "graph", id="ontology", edgedefault="directed")

    def add_node(name: str, label: str, synonyms=(), support: int = 0):
        el = ET.SubElement(graph, "node", id=name)
        ET.SubElement(el, "data", key="d_label").text = label
        ET.SubElement(el, "data", key="d_synonyms").text = json.dumps(list(synonyms), ensure_ascii=False)
        ET.SubElement(el, "data", key="d_support").text = str(support)

    for top in g.top_names:
        add_node(top, TOP_NODE_LABEL)
    for node in sorted(g.nodes, key=lambda n: n.canonical):
        add_node(node.canonical, node.concept_type.value, node.synonyms, node.support)
    for i, edge in enumerate(sorted(g.edges, key=lambda e: (e.kind, e.source, e.target, e.relation))):
        el = ET.SubElement(graph, "edge", id=f"e{i}", source=edge.source, target=edge.target)
        ET.SubElement(el, "data", key="d_relation").text = edge.relation
        ET.SubElement(el, "data", key="d_kind").text = edge.kind
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def export_graph_file(g: OntologyGraph, path: str | Path) -> None:
    """Lossless line-format export; :func:`load_graph_file` inverts it."""
    g.validate()
    records = [{"kind": "ontology-graph", "top_concepts": g.top_names}]
    for node in g.nodes:
        records.append(
            {
                "kind": "node",
                "canonical": node.canonical,
                "synonyms": list(node.synonyms),
                "concept_type": node.concept_type.value,
                "support": node.support,
            }
        )
    for edge in g.edges:
        records.append(
            {
                "kind": "edge",
                "source": edge.source,
                "target": edge.target,
                "relation": edge.relation,
                "edge_kind": edge.kind,
            }
        )
    Path(path).write_text(
        "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n", encoding="utf-8"
    )


def load_graph_file(path: str | Path) -> OntologyGraph:
    nodes: list[ConceptNode] = []
    edges: list[GraphEdge] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        kind = record.get("kind")
        if kind == "ontology-graph":
            continue
        if kind == "node":
            nodes.append(
                ConceptNode(
                    canonical=record["canonical"],
                    synonyms=tuple(record["synonyms"]),
                    concept_type=TopConcept.from_label(record["concept_type"]),
                    support=record["support"],
                )
            )
        elif kind == "edge":
            edges.append(
                GraphEdge(record["source"], record["target"], record["relation"], record["edge_kind"])
            )
        else:
            raise ValueError(f"line {lineno}: unknown record kind {kind!r}")
    graph = OntologyGraph(nodes=nodes, edges=edges)
    graph.validate()
    return graph
