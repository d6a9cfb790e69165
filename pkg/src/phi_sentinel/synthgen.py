"""Synthetic EHR-like corpus generator.

Produces a family of labeled datasets shaped like a multi-site EHR pull:
roughly 900 columns of which 7.5% carry PHI, with each PHI category appearing
in several surface formats across datasets (dashed vs plain SSNs, six-plus
date layouts, coded vs text sex).  Held-out-format mode reserves a handful of
formats for the final dataset only, so evaluation exercises generalization to
formats never seen in training.

Coded categorical PHI (sex as 0/1) is generated balanced while non-PHI binary
flags are generated imbalanced; the regex screen cannot see the difference,
the metadata features can.  That contrast is what lets the corpus reproduce
the qualitative regex-vs-ensemble gap.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .ingest import (
    Column,
    Dataset,
    apply_labels,
    load_dataset,
    load_label_sidecar,
    save_dataset,
    save_label_sidecar,
)

__all__ = ["CorpusSpec", "CorpusBundle", "generate_corpus", "save_corpus", "load_corpus",
           "DEFAULT_HELD_OUT_FORMATS", "EXPECTED_PATTERN"]


DEFAULT_HELD_OUT_FORMATS = {
    "name": "last_first_comma",
    "date": "mon_abbrev_yyyy",
    "phone": "paren_space",
    "ssn": "plain",
    "sex": "coded01",
}


@dataclass
class CorpusSpec:
    n_datasets: int = 8
    rows: int = 400
    phi_fraction: float = 0.075
    seed: int = 42
    total_columns: int = 889
    hold_out: bool = True
    held_out_formats: dict = field(default_factory=lambda: dict(DEFAULT_HELD_OUT_FORMATS))

    def __post_init__(self):
        if self.phi_fraction > 0.5:
            raise ValueError("phi_fraction above 0.5 is not a plausible corpus")
        if self.n_datasets < 1 or self.rows < 1 or self.total_columns < self.n_datasets:
            raise ValueError("infeasible corpus spec")


@dataclass
class CorpusBundle:
    datasets: list
    manifest: dict


# ---------------------------------------------------------------------------
# Value pools
# ---------------------------------------------------------------------------

GIVEN_NAMES = (
    "James John Robert Michael William David Richard Joseph Thomas Charles "
    "Christopher Daniel Matthew Anthony Mark Donald Steven Paul Andrew Joshua "
    "Kenneth Kevin Brian George Edward Ronald Timothy Jason Jeffrey Ryan "
    "Jacob Gary Nicholas Eric Jonathan Stephen Larry Justin Scott Brandon "
    "Benjamin Samuel Gregory Frank Alexander Raymond Patrick Jack Dennis Jerry "
    "Tyler Aaron Jose Adam Henry Nathan Douglas Zachary Peter Kyle "
    "Walter Ethan Jeremy Harold Keith Christian Roger Noah Gerald Carl "
    "Terry Sean Austin Arthur Lawrence Jesse Dylan Bryan Joe Jordan "
    "Mary Patricia Jennifer Linda Elizabeth Barbara Susan Jessica Sarah Karen "
    "Nancy Lisa Margaret Betty Sandra Ashley Dorothy Kimberly Emily Donna "
    "Michelle Carol Amanda Melissa Deborah Stephanie Rebecca Laura Sharon Cynthia "
    "Kathleen Amy Shirley Angela Helen Anna Brenda Pamela Nicole Ruth "
    "Katherine Samantha Christine Emma Catherine Debra Virginia Rachel Carolyn Janet "
    "Maria Heather Diane Julie Joyce Victoria Kelly Christina Joan Evelyn "
    "Lauren Judith Olivia Frances Martha Cheryl Megan Andrea Hannah Jacqueline "
    "Ann Jean Alice Kathryn Gloria Teresa Doris Sara Janice Julia "
    "Grace Judy Theresa Rose Beverly Denise Marilyn Amber Madison Danielle "
    "Brittany Diana Abigail Jane Natalie Lori Tiffany Alexis Kayla Sofia "
    "Luis Carlos Juan Miguel Pedro Wei Ming Chen Ravi Priya "
    "Omar Fatima Aisha Yusuf Ibrahim Olga Ivan Dmitri Chiara Marco"
).split()

SURNAMES = (
    "Smith Johnson Williams Brown Jones Garcia Miller Davis Rodriguez Martinez "
    "Hernandez Lopez Gonzalez Wilson Anderson Thomas Taylor Moore Jackson Martin "
    "Lee Perez Thompson White Harris Sanchez Clark Ramirez Lewis Robinson "
    "Walker Young Allen King Wright Scott Torres Nguyen Hill Flores "
    "Green Adams Nelson Baker Hall Rivera Campbell Mitchell Carter Roberts "
    "Gomez Phillips Evans Turner Diaz Parker Cruz Edwards Collins Reyes "
    "Stewart Morris Morales Murphy Cook Rogers Gutierrez Ortiz Morgan Cooper "
    "Peterson Bailey Reed Kelly Howard Ramos Kim Cox Ward Richardson "
    "Watson Brooks Chavez Wood James Bennett Gray Mendoza Ruiz Hughes "
    "Price Alvarez Castillo Sanders Patel Myers Long Ross Foster Jimenez "
    "Powell Jenkins Perry Russell Sullivan Bell Coleman Butler Henderson Barnes "
    "Gonzales Fisher Vasquez Simmons Romero Jordan Patterson Alexander Hamilton Graham "
    "Reynolds Griffin Wallace Moreno West Cole Hayes Bryant Herrera Gibson "
    "Ellis Tran Medina Aguilar Stevens Murray Ford Castro Marshall Owens "
    "Harrison Fernandez McDonald Woods Washington Kennedy Wells Vargas Henry Chen "
    "Freeman Webb Tucker Guzman Burns Crawford Olson Simpson Porter Hunter "
    "Gordon Mendez Silva Shaw Snyder Mason Dixon Munoz Hunt Hicks "
    "Holmes Palmer Wagner Black Robertson Boyd Rose Stone Salazar Fox "
    "Warren Mills Meyer Rice Schmidt Garza Daniels Ferguson Nichols Stephens "
    "Soto Weaver Ryan Gardner Payne Grant Dunn Kelley Spencer Hawkins"
).split()

STREET_NAMES = (
    "Maple Oak Cedar Pine Elm Washington Lake Hill Walnut Spring "
    "North Ridge Church Willow Mill Sunset Railroad Jackson Highland Meadow "
    "Forest Franklin River Cherry Dogwood Park Main Fifth Third Birch "
    "Hickory Magnolia Chestnut Laurel Poplar Spruce Sycamore Juniper Aspen Cottonwood "
    "Jefferson Lincoln Madison Monroe Adams Harrison Cleveland Hamilton Garfield Grant "
    "Valley Canyon Prairie Summit Harbor Bridge Garden Orchard Brook Creek "
    "Fairview Lakeview Riverside Hillside Woodland Sunrise Crestwood Kingsway Clearwater Stonegate "
    "Heather Rose Ivy Fern Clover Violet Tulip Primrose Azalea Lilac "
    "Cambridge Oxford Windsor Kensington Carlton Somerset Warwick Sheffield Devon Bristol "
    "Liberty Union Central Market Commerce Mission College Prospect Pleasant Grandview"
).split()

STREET_SUFFIXES_FULL = ["Street", "Avenue", "Road", "Boulevard", "Lane", "Drive", "Court", "Terrace", "Way", "Place"]
STREET_SUFFIXES_ABBR = ["St", "Ave", "Rd", "Blvd", "Ln", "Dr.", "Ct", "Ter", "Wy", "Plc"]

EMAIL_DOMAINS = ["example.org", "mail.com", "hospital.net", "clinic.org", "uthealth.edu"]
URL_HOSTS = ["portal.clinic.org", "records.hospital.net", "my.chart.example.org", "lab.results.example.com"]
URL_PATHS = ["home", "visit/summary", "labs/latest.html", "records/index.html", "billing/statement"]

MONTH_ABBR = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
MONTH_FULL = ["January", "February", "March", "April", "May", "June", "July",
              "August", "September", "October", "November", "December"]

RACE_TEXT = ["White", "Black", "Asian", "Caucasian", "American Indian",
             "Alaska Native", "Native Hawaiian", "Pacific Islander"]
ETHNICITY_TEXT = ["Hispanic", "Latino", "Non-Hispanic", "Not Hispanic or Latino"]

MED_NAMES = ["metformin", "lisinopril", "atorvastatin", "amlodipine", "omeprazole",
             "metoprolol", "losartan", "gabapentin", "sertraline", "insulin",
             "aspirin", "warfarin", "furosemide", "prednisone", "albuterol"]
STATUS_WORDS = ["active", "resolved", "chronic", "remission", "acute", "stable"]
DEPT_WORDS_LC = ["cardiology", "oncology", "nephrology", "pediatrics", "radiology",
                 "surgery", "icu", "emergency", "neurology", "dermatology"]
DEPT_WORDS_CAP = ["Cardiology", "Oncology", "Nephrology", "Pediatrics", "Radiology"]
FREQ_WORDS = ["daily", "weekly", "bid", "tid", "prn", "qhs", "monthly"]
RESULT_WORDS = ["positive", "negative", "pending", "inconclusive"]


# ---------------------------------------------------------------------------
# PHI column builders: category -> format -> row generator
# ---------------------------------------------------------------------------

def _name_word(rng):
    return rng.choice(GIVEN_NAMES), rng.choice(SURNAMES)


def _date_parts(rng, lo_year, hi_year):
    return rng.randint(lo_year, hi_year), rng.randint(1, 12), rng.randint(1, 28)


def _date_token(rng, fmt: str, lo_year: int, hi_year: int) -> str:
    y, m, d = _date_parts(rng, lo_year, hi_year)
    if fmt == "iso":
        return f"{y:04d}-{m:02d}-{d:02d}"
    if fmt == "slash_mdy":
        return f"{m:02d}/{d:02d}/{y:04d}"
    if fmt == "slash_dmy":
        return f"{d:02d}/{m:02d}/{y:04d}"
    if fmt == "mdy_2y":
        return f"{m:02d}/{d:02d}/{y % 100:02d}"
    if fmt == "dash_mdy":
        return f"{m:02d}-{d:02d}-{y:04d}"
    if fmt == "slash_ymd":
        return f"{y:04d}/{m:02d}/{d:02d}"
    if fmt == "month_dd_yyyy":
        return f"{rng.choice(MONTH_FULL)} {d}, {y}"
    if fmt == "mon_abbrev_yyyy":
        return f"{rng.choice(MONTH_ABBR)}. {y}"
    if fmt == "mm_yyyy":
        return f"{m:02d}/{y:04d}"
    raise KeyError(fmt)


_DATE_FORMATS = ["iso", "slash_mdy", "slash_dmy", "mdy_2y", "dash_mdy",
                 "slash_ymd", "month_dd_yyyy", "mon_abbrev_yyyy", "mm_yyyy"]


def _phone_token(rng, fmt: str) -> str:
    a, b, c = rng.randint(200, 989), rng.randint(200, 999), rng.randint(0, 9999)
    if fmt == "paren_dash":
        return f"({a}){b}-{c:04d}"
    if fmt == "dash":
        return f"{a}-{b}-{c:04d}"
    if fmt == "plain":
        return f"{a}{b}{c:04d}"
    if fmt == "paren_space":
        return f"({a}) {b}-{c:04d}"
    if fmt == "slash":
        return f"{a}/{b}/{c:04d}"
    raise KeyError(fmt)


_PHONE_FORMATS = ["paren_dash", "dash", "plain", "paren_space", "slash"]


def _age_value(rng) -> int:
    # 0-100 with the over-89 tail HIPAA cares about.
    return rng.randint(90, 100) if rng.random() < 0.1 else rng.randint(0, 89)


def _balanced_binary(rng, tokens):
    p = rng.uniform(0.42, 0.58)
    return lambda r: tokens[0] if r.random() < p else tokens[1]


def _phi_generator(category: str, fmt: str, rng: random.Random):
    """Returns a per-row token function for one PHI column."""
    if category == "name":
        if fmt == "first_last":
            return lambda r: "{} {}".format(*_name_word(r))
        if fmt == "last_first_comma":
            return lambda r: "{1}, {0}".format(*_name_word(r))
        if fmt == "given_only":
            return lambda r: r.choice(GIVEN_NAMES)
        if fmt == "titled":
            return lambda r: "{} {} {}".format(r.choice(["Dr.", "Mr.", "Mrs.", "Ms."]), *_name_word(r))
        if fmt == "middle_initial":
            return lambda r: "{} {}. {}".format(r.choice(GIVEN_NAMES), r.choice("ABCDEFGHJKLMNPRSTW"), r.choice(SURNAMES))
    if category == "address":
        suffixes = STREET_SUFFIXES_FULL if fmt == "full_suffix" else STREET_SUFFIXES_ABBR
        return lambda r: f"{r.randint(1, 9999)} {r.choice(STREET_NAMES)} {r.choice(suffixes)}"
    if category in ("date", "dob"):
        lo, hi = (1930, 2005) if category == "dob" else (2000, 2023)
        return lambda r: _date_token(r, fmt, lo, hi)
    if category == "age":
        if fmt == "bare_int":
            return lambda r: str(_age_value(r))
        if fmt == "years_old":
            return lambda r: f"{_age_value(r)} years old"
        if fmt == "age_prefix":
            return lambda r: f"age {_age_value(r)}"
    if category in ("phone", "fax"):
        return lambda r: _phone_token(r, fmt)
    if category == "ssn":
        if fmt == "dashed":
            return lambda r: f"{r.randint(1, 899):03d}-{r.randint(1, 99):02d}-{r.randint(1, 9999):04d}"
        if fmt == "plain":
            return lambda r: f"{r.randint(100000000, 899999999)}"
    if category == "mrn":
        if fmt == "digits8":
            return lambda r: f"{r.randint(10000000, 99999999)}"
        if fmt == "digits10":
            return lambda r: f"{r.randint(1000000000, 9999999999)}"
        if fmt == "prefixed":
            return lambda r: f"MRN{r.randint(1000000, 9999999)}"
    if category == "account":
        if fmt == "digits10":
            return lambda r: f"{r.randint(1000000000, 9999999999)}"
        if fmt == "alnum":
            return lambda r: f"ACCT-{r.randint(100000, 999999)}"
    if category == "beneficiary":
        if fmt == "digits9":
            return lambda r: f"{r.randint(100000000, 999999999)}"
        if fmt == "alnum":
            return lambda r: f"HPB{r.randint(10000000, 99999999)}"
    if category == "email":
        if fmt == "first_dot_last":
            return lambda r: "{}.{}@{}".format(r.choice(GIVEN_NAMES).lower(), r.choice(SURNAMES).lower(), r.choice(EMAIL_DOMAINS))
        if fmt == "initial_last":
            return lambda r: "{}{}{}@{}".format(r.choice(GIVEN_NAMES)[0].lower(), r.choice(SURNAMES).lower(), r.randint(1, 99), r.choice(EMAIL_DOMAINS))
    if category == "url":
        if fmt == "https_path":
            return lambda r: f"https://{r.choice(URL_HOSTS)}/{r.choice(URL_PATHS)}"
        if fmt == "bare_domain":
            return lambda r: r.choice(URL_HOSTS)
    if category == "ip":
        return lambda r: ".".join(str(r.randint(0, 255)) for _ in range(4))
    if category == "sex":
        if fmt == "mf":
            return _balanced_binary(rng, ("M", "F"))
        if fmt == "malefemale":
            return _balanced_binary(rng, ("Male", "Female"))
        if fmt == "coded01":
            return _balanced_binary(rng, ("0", "1"))
        if fmt == "coded12":
            return _balanced_binary(rng, ("1", "2"))
    if category == "race":
        if fmt == "text":
            return lambda r: r.choice(RACE_TEXT)
        if fmt == "coded":
            return lambda r: str(r.randint(0, 4))
    if category == "ethnicity":
        if fmt == "text":
            return lambda r: r.choice(ETHNICITY_TEXT)
        if fmt == "coded01":
            return _balanced_binary(rng, ("0", "1"))
    raise KeyError(f"no PHI generator for {category}/{fmt}")


# Category letters follow the HIPAA identifier table.
CATEGORY_LETTER = {
    "name": "A", "address": "B", "date": "C", "dob": "C", "age": "C",
    "phone": "D", "fax": "E", "email": "F", "ssn": "G", "mrn": "H",
    "beneficiary": "I", "account": "J", "url": "N", "ip": "O",
    "sex": "R", "race": "R", "ethnicity": "R",
}

# Intended screening pattern per (category, format); None marks formats that
# deliberately defeat the regex screen (coded categoricals, bare-int ages).
EXPECTED_PATTERN = {
    ("name", "first_last"): "name-word",
    ("name", "given_only"): "name-word",
    ("name", "titled"): "name-title",
    ("name", "middle_initial"): "name-middle-initial",
    ("name", "last_first_comma"): None,
    ("address", "full_suffix"): "address-keywords",
    ("address", "abbr_suffix"): "address-keywords",
    ("age", "bare_int"): None,
    ("age", "years_old"): "age-keywords",
    ("age", "age_prefix"): "age-keywords",
    ("ssn", "dashed"): "ssn",
    ("ssn", "plain"): "ssn",
    ("mrn", "digits8"): "id-digit-run",
    ("mrn", "digits10"): "id-digit-run",
    ("mrn", "prefixed"): "id-alnum",
    ("account", "digits10"): "id-digit-run",
    ("account", "alnum"): "id-alnum",
    ("beneficiary", "digits9"): "id-digit-run",
    ("beneficiary", "alnum"): "id-alnum",
    ("email", "first_dot_last"): "email",
    ("email", "initial_last"): "email",
    ("url", "https_path"): "url",
    ("url", "bare_domain"): "url",
    ("ip", "dotted"): "ip-address",
    ("sex", "mf"): None,
    ("sex", "malefemale"): "gender-keywords",
    ("sex", "coded01"): None,
    ("sex", "coded12"): None,
    ("race", "text"): "race-keywords",
    ("race", "coded"): None,
    ("ethnicity", "text"): "ethnicity-keywords",
    ("ethnicity", "coded01"): None,
}
for _fmt in _DATE_FORMATS:
    EXPECTED_PATTERN[("date", _fmt)] = "date-any"
    EXPECTED_PATTERN[("dob", _fmt)] = "date-any"
for _fmt in _PHONE_FORMATS:
    EXPECTED_PATTERN[("phone", _fmt)] = "id-digit-run"
    EXPECTED_PATTERN[("fax", _fmt)] = "id-digit-run"

_BASE_COLUMN_NAMES = {
    "name": "patient_name", "address": "home_address", "date": "visit_date",
    "dob": "birth_date", "age": "age", "phone": "phone_number", "fax": "fax_number",
    "ssn": "ssn", "mrn": "mrn", "beneficiary": "beneficiary_id", "account": "account_no",
    "email": "email", "url": "portal_url", "ip": "client_ip", "sex": "sex",
    "race": "race", "ethnicity": "ethnicity",
}


def _core_pairs() -> list:
    """Every non-held-out PHI (category, format) pair, once each."""
    pairs = []
    pairs += [("name", f) for f in ("first_last", "given_only", "titled", "middle_initial")]
    pairs += [("address", f) for f in ("full_suffix", "abbr_suffix")]
    pairs += [("date", f) for f in _DATE_FORMATS if f != "mon_abbrev_yyyy"]
    pairs += [("dob", f) for f in ("iso", "slash_mdy", "mdy_2y", "slash_dmy", "dash_mdy", "month_dd_yyyy", "mm_yyyy")]
    pairs += [("age", f) for f in ("bare_int", "years_old", "age_prefix")]
    pairs += [("phone", f) for f in ("paren_dash", "dash", "plain", "slash")]
    pairs += [("fax", f) for f in ("paren_dash", "dash", "plain", "slash")]
    pairs += [("ssn", "dashed")]
    pairs += [("mrn", f) for f in ("digits8", "digits10", "prefixed")]
    pairs += [("account", f) for f in ("digits10", "alnum")]
    pairs += [("beneficiary", f) for f in ("digits9", "alnum")]
    pairs += [("email", f) for f in ("first_dot_last", "initial_last")]
    pairs += [("url", f) for f in ("https_path", "bare_domain")]
    pairs += [("ip", "dotted")]
    pairs += [("sex", f) for f in ("mf", "malefemale", "coded12")]
    pairs += [("race", f) for f in ("text", "coded")]
    pairs += [("ethnicity", f) for f in ("text", "coded01")]
    return pairs


# Repeat schedule for corpora larger than the core catalog; front-loaded with
# the regex-invisible formats (several sites code sex/ethnicity/race as
# integers) so every training split retains coded examples of each.
_EXTRA_PAIRS = [
    ("ethnicity", "coded01"), ("sex", "coded12"), ("age", "bare_int"),
    ("race", "coded"), ("ethnicity", "coded01"), ("sex", "coded12"),
    ("mrn", "digits8"), ("phone", "paren_dash"), ("ethnicity", "coded01"),
    ("sex", "coded12"), ("race", "coded"), ("dob", "iso"),
    ("name", "first_last"), ("sex", "malefemale"), ("phone", "dash"),
    ("mrn", "digits10"), ("dob", "slash_mdy"), ("name", "given_only"),
    ("email", "first_dot_last"), ("date", "iso"), ("address", "full_suffix"),
    ("ssn", "dashed"), ("ip", "dotted"), ("age", "years_old"),
]


def _training_pairs(count: int) -> list:
    """Exactly ``count`` non-held-out pairs: the core catalog (trimmed from its
    tail if the corpus is tiny) padded by cycling the extras schedule."""
    pairs = _core_pairs()
    if count <= len(pairs):
        return pairs[:count]
    i = 0
    while len(pairs) < count:
        pairs.append(_EXTRA_PAIRS[i % len(_EXTRA_PAIRS)])
        i += 1
    return pairs


# ---------------------------------------------------------------------------
# Non-PHI column builders
# ---------------------------------------------------------------------------

_NONPHI_KINDS = (
    ["lab_gaussian"] * 14 + ["lab_bimodal"] * 12 + ["vital"] * 12
    + ["lab_lognormal"] * 8 + ["dosage"] * 10 + ["flag"] * 15 + ["count"] * 10
    + ["category_lc"] * 14 + ["icd_code"] * 3 + ["charge"] * 2
)


def _nonphi_generator(kind: str, rng: random.Random):
    # Measured values repeat: instruments and charting record at finite
    # precision, so numeric columns are quantized to a per-column step.  That
    # keeps their cardinality (and Gini impurity) well below identifier
    # columns, which never repeat.
    if kind in ("lab_gaussian", "vital"):
        if kind == "vital":
            mu, sigma = rng.choice([(75.0, 12.0), (120.0, 15.0), (98.6, 0.7),
                                    (27.0, 5.0), (16.0, 3.0)])
        else:
            mu = rng.uniform(0.5, 300.0)
            sigma = mu * rng.uniform(0.05, 0.3)
        step = sigma / rng.uniform(8.0, 16.0)
        return lambda r: "%.2f" % (round(r.gauss(mu, sigma) / step) * step)
    if kind == "lab_bimodal":
        # two-population biomarkers: flat-topped distributions whose kurtosis
        # sits in the same range as uniform identifier columns
        mu = rng.uniform(5.0, 150.0)
        gap = mu * rng.uniform(0.4, 0.9)
        sigma = gap * rng.uniform(0.15, 0.35)
        step = sigma / rng.uniform(8.0, 16.0)
        weight = rng.uniform(0.35, 0.65)
        def bimodal(r, mu=mu, gap=gap, sigma=sigma, step=step, weight=weight):
            center = mu + (gap if r.random() < weight else 0.0)
            return "%.2f" % (round(r.gauss(center, sigma) / step) * step)
        return bimodal
    if kind in ("lab_lognormal", "charge"):
        mu = rng.uniform(0.5, 4.0) if kind == "lab_lognormal" else 6.0
        sigma = rng.uniform(0.3, 0.8) if kind == "lab_lognormal" else 1.2
        step = sigma / rng.uniform(8.0, 16.0)  # quantize in log space
        return lambda r: "%.2f" % (
            2.718281828459045 ** (round(r.gauss(mu, sigma) / step) * step)
        )
    if kind == "dosage":
        p_zero = rng.uniform(0.35, 0.6)
        doses = rng.choice([["5", "10", "20", "25", "50", "100"],
                            ["2.5", "5", "7.5", "10", "15"],
                            ["100", "200", "250", "500"]])
        return lambda r: "0" if r.random() < p_zero else r.choice(doses)
    if kind == "flag":
        p_one = rng.uniform(0.03, 0.22)
        return lambda r: "1" if r.random() < p_one else "0"
    if kind == "count":
        lam = rng.uniform(2.0, 25.0)
        return lambda r: str(max(0, round(r.gauss(lam, max(1.0, lam ** 0.5)))))
    if kind == "category_lc":
        pool = rng.choice([MED_NAMES, STATUS_WORDS, DEPT_WORDS_LC, FREQ_WORDS, RESULT_WORDS])
        return lambda r: r.choice(pool)
    if kind == "category_cap":
        return lambda r: r.choice(DEPT_WORDS_CAP)
    if kind == "icd_code":
        # a site's diagnosis column clusters on a few dozen common codes
        pool = [
            f"{rng.choice('EIJKCNM')}{rng.randint(10, 99)}.{rng.randint(0, 9)}"
            for _ in range(rng.randint(15, 40))
        ]
        return lambda r: r.choice(pool)
    raise KeyError(kind)


_NONPHI_BASE_NAMES = {
    "lab_gaussian": "lab", "lab_bimodal": "marker", "vital": "vital",
    "lab_lognormal": "assay", "dosage": "dose", "flag": "flag", "count": "visits",
    "category_lc": "class", "category_cap": "dept", "icd_code": "dx_code",
    "charge": "charge",
}


# ---------------------------------------------------------------------------
# Corpus assembly
# ---------------------------------------------------------------------------

def _build_cells(token_fn, rng, rows: int, null_frac: float) -> list:
    return [None if rng.random() < null_frac else token_fn(rng) for _ in range(rows)]


def _split_quota(total: int, parts: int) -> list:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def generate_corpus(spec: CorpusSpec) -> CorpusBundle:
    """Build all datasets plus a manifest describing every generated column."""
    master = random.Random(spec.seed)
    col_quota = _split_quota(spec.total_columns, spec.n_datasets)
    phi_total = round(spec.total_columns * spec.phi_fraction)
    phi_quota = _split_quota(phi_total, spec.n_datasets)

    held_out = [(c, f) for c, f in spec.held_out_formats.items()] if spec.hold_out else []
    test_ds = spec.n_datasets - 1
    if spec.hold_out and phi_quota[test_ds] < len(held_out):
        phi_quota[test_ds] = len(held_out)

    normal_needed = phi_total - len(held_out)
    pairs = _training_pairs(normal_needed)
    master.shuffle(pairs)

    # Deal non-held-out PHI pairs to datasets by quota; held-out pairs go to
    # the final dataset only.
    per_dataset_pairs = [[] for _ in range(spec.n_datasets)]
    cursor = 0
    for i in range(spec.n_datasets):
        want = phi_quota[i] - (len(held_out) if i == test_ds else 0)
        per_dataset_pairs[i] = pairs[cursor:cursor + want]
        cursor += want
    if spec.hold_out:
        per_dataset_pairs[test_ds] += held_out

    # Two deliberately capitalized non-PHI text columns corpus-wide: regex
    # false positives the ensemble has to absorb.
    cap_datasets = {1 % spec.n_datasets, 5 % spec.n_datasets} if spec.n_datasets > 1 else {0}

    datasets = []
    manifest_datasets = []
    for i in range(spec.n_datasets):
        rng = random.Random(spec.seed * 1000003 + i * 7919)
        ds_name = f"site_{chr(ord('a') + i % 26)}{i // 26 or ''}"
        columns = []
        records = []

        for category, fmt in per_dataset_pairs[i]:
            gen = _phi_generator(category, fmt, rng)
            null_frac = rng.choice([0.0, 0.01, 0.02])
            cells = _build_cells(gen, rng, spec.rows, null_frac)
            letter = CATEGORY_LETTER[category]
            columns.append((f"{_BASE_COLUMN_NAMES[category]}", cells, 1, letter))
            records.append({
                "category": category, "format": fmt, "label": 1,
                "phi_letter": letter,
                "expected_pattern": EXPECTED_PATTERN.get((category, fmt)),
                "held_out": (category, fmt) in held_out,
            })

        n_nonphi = col_quota[i] - len(per_dataset_pairs[i])
        kinds = [_NONPHI_KINDS[(i * 13 + j) % len(_NONPHI_KINDS)] for j in range(n_nonphi)]
        if i in cap_datasets and n_nonphi > 0:
            kinds[-1] = "category_cap"
        for kind in kinds:
            gen = _nonphi_generator(kind, rng)
            null_frac = rng.choice([0.0, 0.02, 0.05, 0.1, 0.2])
            cells = _build_cells(gen, rng, spec.rows, null_frac)
            columns.append((f"{_NONPHI_BASE_NAMES[kind]}", cells, 0, None))
            records.append({
                "category": kind, "format": None, "label": 0,
                "phi_letter": None, "expected_pattern": None, "held_out": False,
            })

        order = list(range(len(columns)))
        rng.shuffle(order)
        named = {}
        final_columns = []
        final_records = []
        for pos in order:
            base, cells, label, letter = columns[pos]
            named[base] = named.get(base, 0) + 1
            name = base if named[base] == 1 else f"{base}_{named[base]}"
            final_columns.append(Column(name=name, cells=cells, label=label, category=letter))
            rec = dict(records[pos])
            rec["name"] = name
            final_records.append(rec)

        datasets.append(Dataset.build(ds_name, final_columns))
        manifest_datasets.append({"name": ds_name, "columns": final_records})

    manifest = {
        "seed": spec.seed,
        "rows": spec.rows,
        "n_datasets": spec.n_datasets,
        "phi_fraction": spec.phi_fraction,
        "total_columns": spec.total_columns,
        "held_out_formats": dict(spec.held_out_formats) if spec.hold_out else {},
        "datasets": manifest_datasets,
    }
    return CorpusBundle(datasets=datasets, manifest=manifest)


def save_corpus(bundle: CorpusBundle, outdir) -> Path:
    """Write each dataset as CSV + label sidecar, plus manifest.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = json.loads(json.dumps(bundle.manifest))  # deep copy
    for dataset, mds in zip(bundle.datasets, manifest["datasets"]):
        data_file = f"{dataset.name}.csv"
        labels_file = f"{dataset.name}.labels.csv"
        save_dataset(dataset, outdir / data_file)
        save_label_sidecar(
            [(c.name, c.label or 0, c.category) for c in dataset.columns],
            outdir / labels_file,
        )
        mds["data_file"] = data_file
        mds["labels_file"] = labels_file
    manifest_path = outdir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest_path


def load_corpus(manifest_path) -> CorpusBundle:
    """Read back a saved corpus: datasets with sidecar labels applied."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    datasets = []
    for mds in manifest["datasets"]:
        ds = load_dataset(manifest_path.parent / mds["data_file"], name=mds["name"])
        apply_labels(ds, load_label_sidecar(manifest_path.parent / mds["labels_file"]))
        datasets.append(ds)
    return CorpusBundle(datasets=datasets, manifest=manifest)
