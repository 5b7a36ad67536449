"""Synthetic "residents" corpus with ground-truth entity labels.

Each seed person yields up to five documents, at most one per domain, with
perturbed copies of the person's attributes and random explicit or implicit
references among that person's own documents. Relatives share a surname and
address with the seed person but get independent documents and no
references to the seed's documents.
"""

from __future__ import annotations

import random
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from erld.matching import RuleSet
from erld.model import AttributeSpec, Document, SchemaConfig

DOMAINS = {
    "VOT": ("Voter-Card", "voter_id"),
    "PAN": ("PAN", "pan_no"),
    "DL": ("Driving-Licence", "licence_no"),
    "BAN": ("Bank-Account", "account_no"),
    "PHN": ("Phone-Connection", "connection_no"),
}

FIRST_NAMES = (
    "Aarav Abhay Aditi Ajay Akash Amit Amita Anil Anita Anjali Arjun Asha Deepak Divya Gaurav Geeta "
    "Harish Isha Jaya Karan Kavita Kiran Lakshmi Manish Meena Mohan Nandini Naveen Neha Nikhil Pooja "
    "Pradeep Priya Rahul Rajesh Ravi Rekha Rohit Sanjay Sarita Seema Shalini Suresh Sunil Sunita "
    "Tanvi Uma Varun Vijay Vikram Vinod Yamini Zoya Farhan Imran Salma Joseph Maria Harpreet Gurdeep"
).split()
MIDDLE_NAMES = "Kumar Lal Prasad Devi Chand Nath Raj Mohan Singh Bai Rani Shankar Kant Dutt Pal".split()
SURNAMES = (
    "Sharma Verma Gupta Mehta Kumar Singh Rao Reddy Iyer Nair Menon Pillai Das Ghosh Bose Banerjee "
    "Mukherjee Chatterjee Joshi Kulkarni Patil Desai Shah Patel Chauhan Yadav Mishra Pandey Tiwari "
    "Saxena Agarwal Bansal Malhotra Kapoor Khanna Sethi Gill Sandhu Khan Qureshi Fernandes DSouza"
).split()
STREET_ROOTS = (
    "MG Gandhi Nehru Tagore Shivaji Ashoka Patel Netaji Tilak Rajaji Ambedkar Azad Bose Sarojini "
    "Lotus Lake Temple Station Church College Court Market Canal Hill Mill Fort Park Ring Garden "
    "Banyan Mango Neem Peepal Jasmine Rose Lily Palm Cedar River Ganga Yamuna Kaveri Narmada Godavari "
    "Residency Brigade Cunningham Infantry Cantonment Mission Library Museum Stadium Airport Harbour"
).split()
STREET_KINDS = "Road Street Marg Lane Path Avenue".split()
LOCALITY_KINDS = "Nagar Colony Enclave Vihar Puram Layout".split()
CITIES = (
    "Noida Kanpur Lucknow Bengaluru Kolkata Mumbai Pune Hyderabad Delhi Jaipur Chennai Patna Bhopal "
    "Indore Nagpur Surat Vadodara Ludhiana Agra Nashik Ranchi Raipur Guwahati Mysuru Kochi Madurai "
    "Coimbatore Vizag Dehradun Amritsar"
).split()
MAIL_HOSTS = "mail.com inbox.in post.net webmail.org".split()
IMPLICIT_LABELS = ("Identity proof:", "Reference document", "Linked account no.", "Proof submitted (", "ID:")
RELATIONS = ("parent", "child", "spouse", "neighbour")


@dataclass
class GeneratorConfig:
    num_seed_entities: int = 1000
    doc_creation_prob: Mapping[str, float] = field(default_factory=lambda: dict.fromkeys(DOMAINS, 0.55))
    typo_rate: float = 0.15
    name_swap_prob: float = 0.03
    middle_name_drop_prob: float = 0.3
    attribute_drop_prob: float = 0.25
    email_drop_prob: float = 0.5
    address_change_prob: float = 0.05
    related_entity_prob: float = 0.4
    reference_prob: float = 0.6
    reference_density: float = 0.1
    implicit_reference_prob: float = 0.3
    link_only_fraction: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_seed_entities < 1:
            raise ValueError("num_seed_entities must be >= 1")
        probs = dict(self.doc_creation_prob)
        unknown = set(probs) - set(DOMAINS)
        if unknown:
            raise ValueError(f"unknown domains {sorted(unknown)}")
        self.doc_creation_prob = {d: float(probs.get(d, 0.0)) for d in DOMAINS}
        named = {k: v for k, v in asdict(self).items() if k.endswith(("_prob", "_rate", "_density", "_fraction"))}
        named.update({f"doc_creation_prob[{d}]": p for d, p in self.doc_creation_prob.items()})
        for key, value in named.items():
            if isinstance(value, float) and not 0.0 <= value <= 1.0:
                raise ValueError(f"{key}={value} is not a probability")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> GeneratorConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown generator options {sorted(extra)}")
        return cls(**data)


@dataclass
class _Person:
    label: str
    first: str
    middle: str | None
    last: str
    dob: str
    phone: str
    email: str
    address: str
    alt_address: str


def residents_schema() -> SchemaConfig:
    attrs = [AttributeSpec(key, frozenset({"unique"}), domain=tag) for tag, (_, key) in DOMAINS.items()]
    attrs += [
        AttributeSpec("name", frozenset({"soft"})),
        AttributeSpec("address", frozenset({"soft"})),
        AttributeSpec("dob", frozenset({"hard"})),
        AttributeSpec("phone", frozenset({"hard"})),
        AttributeSpec("email", frozenset({"hard"})),
        AttributeSpec("proof_id", frozenset({"referential-explicit"})),
        AttributeSpec("doc_details", frozenset({"referential-implicit"})),
    ]
    return SchemaConfig(tuple(attrs), tuple(DOMAINS), {tag: key for tag, (_, key) in DOMAINS.items()})


def residents_rules_config(with_traversal: bool = True) -> dict[str, Any]:
    same = lambda attr: {"predicate": "same", "attribute": attr}  # noqa: E731
    rules = [
        {"name": "name_dob_address", "all": [same("name"), same("dob"), same("address")]},
        {"name": "name_phone", "all": [same("name"), same("phone")]},
        {"name": "name_email", "all": [same("name"), same("email")]},
        {"name": "email_phone", "all": [same("email"), same("phone")]},
    ]
    if with_traversal:
        rules.append({"name": "name_address_linked", "all": [same("name"), same("address"), {"predicate": "traversal"}]})
    return {"kind": "rules", "rules": rules}


def residents_rules(with_traversal: bool = True) -> RuleSet:
    return RuleSet.from_dict(residents_rules_config(with_traversal), residents_schema())


class _Generator:
    def __init__(self, config: GeneratorConfig):
        self.cfg = config
        self.rng = random.Random(config.rng_seed)
        self.counters = dict.fromkeys(DOMAINS, 100000)
        self.docs: list[Document] = []
        self.gold: dict[str, str] = {}
        self.n_entities = 0
        self.used_phones: set[str] = set()
        # the settled area grows with the population, so bigger corpora
        # draw addresses from a wider vocabulary
        n = config.num_seed_entities
        streets = [f"{r} {k}" for r in STREET_ROOTS for k in STREET_KINDS]
        localities = [f"{r} {k}" for r in STREET_ROOTS for k in LOCALITY_KINDS]
        localities += [f"Sector {i}" for i in range(1, 121)]
        self.rng.shuffle(streets)
        self.rng.shuffle(localities)
        self.streets = streets[:min(len(streets), max(20, n // 3))]
        self.localities = localities[:min(len(localities), max(16, n // 4))]
        self.cities = CITIES[:min(len(CITIES), max(12, n // 150))]

    # --- people

    def _phone(self) -> str:
        while True:
            phone = str(self.rng.randrange(7000000000, 9999999999))
            if phone not in self.used_phones:
                self.used_phones.add(phone)
                return phone

    def _address(self, street: str | None = None, locality: str | None = None, city: str | None = None) -> str:
        rng = self.rng
        return " ".join([
            str(rng.randrange(1, 400)),
            street or rng.choice(self.streets),
            locality or rng.choice(self.localities),
            city or rng.choice(self.cities),
        ])

    def _person(self, last: str | None = None, address: str | None = None) -> _Person:
        rng = self.rng
        self.n_entities += 1
        first = rng.choice(FIRST_NAMES)
        middle = rng.choice(MIDDLE_NAMES) if rng.random() < 0.5 else None
        last = last or rng.choice(SURNAMES)
        dob = f"{rng.randrange(1940, 2005)}-{rng.randrange(1, 13):02d}-{rng.randrange(1, 29):02d}"
        email = f"{first.lower()}.{last.lower()}{rng.randrange(1, 999)}@{rng.choice(MAIL_HOSTS)}"
        return _Person(
            label=f"P{self.n_entities:07d}",
            first=first,
            middle=middle,
            last=last,
            dob=dob,
            phone=self._phone(),
            email=email,
            address=address or self._address(),
            alt_address=self._address(),
        )

    def _relative(self, seed: _Person) -> _Person:
        relation = self.rng.choice(RELATIONS)
        if relation == "neighbour":
            street_part = seed.address.split(" ", 1)[1]
            return self._person(address=f"{self.rng.randrange(1, 400)} {street_part}")
        return self._person(last=seed.last, address=seed.address)

    # --- perturbations

    def _typo(self, text: str) -> str:
        """Skip one or two characters inside one word."""
        words = text.split()
        candidates = [i for i, w in enumerate(words) if len(w) > 3]
        if not candidates:
            return text
        i = self.rng.choice(candidates)
        w = words[i]
        for _ in range(self.rng.choice((1, 1, 2))):
            if len(w) <= 3:
                break
            cut = self.rng.randrange(1, len(w))
            w = w[:cut] + w[cut + 1:]
        words[i] = w
        return " ".join(words)

    def _name(self, p: _Person, light: bool) -> str:
        rng, cfg = self.rng, self.cfg
        middle = p.middle
        if middle and rng.random() < cfg.middle_name_drop_prob:
            middle = None
        first, last = p.first, p.last
        if not light and rng.random() < cfg.name_swap_prob:
            first, last = last, first
        name = " ".join(x for x in (first, middle, last) if x)
        if not light and rng.random() < cfg.typo_rate:
            name = self._typo(name)
        return name

    # --- documents

    def _documents(self, p: _Person, link_only: bool) -> list[tuple[str, dict[str, set[str]]]]:
        rng, cfg = self.rng, self.cfg
        domains = [d for d in DOMAINS if rng.random() < cfg.doc_creation_prob[d]]
        if not domains:
            domains = [rng.choice(list(DOMAINS))]
        rng.shuffle(domains)
        hard_slots = ["dob", "phone", "email"]
        out = []
        for k, tag in enumerate(domains):
            key_attr = DOMAINS[tag][1]
            self.counters[tag] += 1
            attrs: dict[str, set[str]] = {key_attr: {str(self.counters[tag])}}
            attrs["name"] = {self._name(p, light=link_only)}
            if link_only:
                attrs["address"] = {p.address}
                # no two documents share a hard value, so only links can join them
                if k < len(hard_slots):
                    attrs[hard_slots[k]] = {getattr(p, hard_slots[k])}
            else:
                address = p.alt_address if rng.random() < cfg.address_change_prob else p.address
                if rng.random() < cfg.typo_rate:
                    address = self._typo(address)
                attrs["address"] = {address}
                if rng.random() >= cfg.attribute_drop_prob:
                    attrs["dob"] = {p.dob}
                if rng.random() >= cfg.attribute_drop_prob:
                    attrs["phone"] = {p.phone}
                if rng.random() >= cfg.email_drop_prob:
                    attrs["email"] = {p.email}
            out.append((tag, attrs))
        return out

    def _link(self, docs: list[tuple[str, dict[str, set[str]]]], link_only: bool) -> None:
        rng, cfg = self.rng, self.cfg
        keys = [tag + next(iter(attrs[DOMAINS[tag][1]])) for tag, attrs in docs]
        edges: set[tuple[int, int]] = set()
        for i in range(1, len(docs)):
            if link_only or rng.random() < cfg.reference_prob:
                edges.add((i, rng.randrange(i)))
        for i in range(len(docs)):
            for j in range(len(docs)):
                if i != j and (j, i) not in edges and rng.random() < cfg.reference_density:
                    edges.add((i, j))
        for src, dst in sorted(edges):
            attrs = docs[src][1]
            if rng.random() < cfg.implicit_reference_prob:
                text = f"{rng.choice(IMPLICIT_LABELS)} {keys[dst]}"
                attrs.setdefault("doc_details", set()).add(text)
            else:
                attrs.setdefault("proof_id", set()).add(keys[dst])

    def _emit(self, p: _Person, link_only: bool) -> None:
        docs = self._documents(p, link_only)
        self._link(docs, link_only)
        for tag, attrs in docs:
            doc = Document(tag + next(iter(attrs[DOMAINS[tag][1]])), tag, attrs)
            self.docs.append(doc)
            self.gold[doc.id] = p.label

    def run(self) -> tuple[list[Document], dict[str, str]]:
        rng, cfg = self.rng, self.cfg
        for _ in range(cfg.num_seed_entities):
            seed = self._person()
            self._emit(seed, link_only=rng.random() < cfg.link_only_fraction)
            if rng.random() < cfg.related_entity_prob:
                self._emit(self._relative(seed), link_only=False)
        return self.docs, self.gold


def generate(config: GeneratorConfig) -> tuple[list[Document], dict[str, str]]:
    """Return the corpus and the document id -> entity label map."""
    return _Generator(config).run()


def write_gold(gold: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, label in sorted(gold.items()):
            fh.write(f"{doc_id}\t{label}\n")


def read_gold(path: str | Path) -> dict[str, str]:
    gold = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'doc_id<TAB>label'")
            gold[parts[0]] = parts[1]
    return gold
