"""Seeded synthetic ledgers with planted recurring charges.

The real WageGoal data is private, so fixtures are generated here in the
same CSV dialect. Every planted recurring series is recorded as ground
truth (one row per occurrence) for extraction scoring.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import write_balances_csv, write_wagegoal_csv
from .model import Account, AccountKind, Category, Ledger, Step, Transaction
from .recurring import Frequency, add_months

START = date(2016, 6, 21)
END = date(2017, 6, 16)

NOISE_MERCHANTS = [
    ("TARGET T-{n}", "Shops"), ("CVS PHARMACY #{n}", "Healthcare"), ("MCDONALD'S F{n}", "Food and Drink"),
    ("SHELL OIL {n}", "Travel"), ("DUANE READE #{n}", "Shops"), ("DUNKIN #{n}", "Food and Drink"),
    ("UBER TRIP {n}", "Travel"), ("AMAZON MKTPLACE PMTS {n}", "Shops"), ("CHIPOTLE {n}", "Food and Drink"),
    ("MTA MVM {n}", "Travel"), ("HOME DEPOT #{n}", "Shops"), ("AMC THEATRES {n}", "Recreation"),
    ("PETCO {n}", "Shops"), ("SUBWAY {n}", "Food and Drink"), ("WALGREENS #{n}", "Healthcare"),
    ("BURGER KING #{n}", "Food and Drink"), ("OLD NAVY {n}", "Shops"), ("EXXONMOBIL {n}", "Travel"),
    ("POPEYES {n}", "Food and Drink"), ("DOLLAR TREE {n}", "Shops"), ("GAMESTOP {n}", "Recreation"),
    ("CHURCH DONATION {n}", "Community"), ("ATM WITHDRAWAL {n}", ""), ("VENMO PAYMENT {n}", ""),
    ("PAYPAL INST XFER {n}", ""), ("DELI GROCERY {n}", "Food and Drink"), ("7-ELEVEN {n}", "Food and Drink"),
    ("BEST BUY {n}", "Shops"), ("LYFT RIDE {n}", "Travel"), ("KFC {n}", "Food and Drink"),
]
ONE_OFF_BILLS = [
    ("BILL PAY METRO MEDICAL {n}", "Payment - Bill Pay"),
    ("STATE FARM CLAIM DEDUCTIBLE {n}", "Service - Insurance"),
    ("BILL PAY PARKING TICKET {n}", "Payment - Bill Pay"),
    ("ONLINE SUBSCRIPTION GIFT {n}", "Service - Subscription"),
]
LARGE = [("CAR REPAIR MIDAS {n}", "Service"), ("ROOFING CONTRACTOR {n}", "Service"), ("HOUSE CLEANING SERVICE {n}", "Service"),
         ("DENTIST DR SMITH {n}", "Healthcare"), ("STUDENT LOAN PAYOFF {n}", "Payment")]
MONTHLY_BILLS = [
    ("NETFLIX.COM {mm}/{yy}", "Service - Subscription", (9.99, 11.99)),
    ("SPOTIFY USA {n}", "Service - Subscription", (9.99, 9.99)),
    ("CON ED OF NY BILL PAY {n}", "Payment - Bill Pay", (45.0, 140.0)),
    ("GEICO AUTO INS {n}", "Service - Insurance", (80.0, 160.0)),
    ("T-MOBILE AUTOPAY {n}", "Service", (40.0, 90.0)),
    ("PLANET FITNESS CLUB FEES {n}", "Recreation", (10.0, 25.0)),
]
WEEKLY_HABITS = [
    ("KEY FOOD SUPERMARKET {n}", "Food and Drink", (40.0, 90.0)),
    ("LAUNDROMAT CARD {n}", "Service", (12.0, 20.0)),
    ("METROCARD VENDING {n}", "Travel", (20.0, 33.0)),
]
BIWEEKLY_HABITS = [
    ("CHILD CARE CENTER {n}", "Service", (120.0, 250.0)),
    ("ZELLE TO MOM {n}", "Transfer", (50.0, 150.0)),
    ("BARBER SHOP {n}", "Recreation", (20.0, 35.0)),
]


@dataclass
class PlantedSeries:
    series_id: str
    account_id: str
    frequency: Frequency
    description: str
    category_label: str
    occurrences: list[tuple[date, int]] = field(default_factory=list)

    @property
    def category(self) -> Category:
        return Category.parse(self.category_label) or Category.UNLABELED


@dataclass
class SyntheticLedger:
    ledger: Ledger
    planted: list[PlantedSeries]


def _ref(rng: np.random.Generator, digits: int = 5) -> str:
    return str(int(rng.integers(10 ** (digits - 1), 10 ** digits)))


def _render(template: str, rng: np.random.Generator, when: date) -> str:
    return template.format(n=_ref(rng), mm=f"{when.month:02d}", yy=f"{when.year % 100:02d}")


def _cents(x: float) -> int:
    return int(round(x * 100))


def _payday(d: date) -> date:
    # weekend paydays move to the preceding Friday
    return d - timedelta(days=max(0, d.weekday() - 4))


def _jitter(rng: np.random.Generator, d: date, spread: int) -> date:
    return d + timedelta(days=int(rng.integers(-spread, spread + 1))) if spread else d


def generate_account(
    rng: np.random.Generator,
    account_id: str,
    start: date = START,
    end: date = END,
    salary_range: tuple[float, float] = (700.0, 1800.0),
) -> tuple[list[Transaction], list[PlantedSeries], int]:
    """One paycheck account; returns transactions, planted series and opening balance (cents)."""
    txs: list[Transaction] = []
    planted: list[PlantedSeries] = []

    def add(series: PlantedSeries | None, when: date, desc: str, cents: int, label: str) -> None:
        if not start <= when <= end:
            return
        cat = Category.parse(label) or Category.UNLABELED
        txs.append(Transaction(account_id, when, desc, cents, cat, label))
        if series is not None:
            series.occurrences.append((when, cents))

    salary = float(rng.uniform(*salary_range))
    employer = ["ACME CORP", "CITY HEALTH", "METRO TRANSIT", "BEST STAFFING", "GREEN GROCERS"][int(rng.integers(5))]
    pay = PlantedSeries(f"{account_id}-salary", account_id, Frequency.SEMIMONTHLY, f"PAYROLL {employer} DIR DEP", "Transfer - Payroll")
    planted.append(pay)
    m = date(start.year, start.month, 1)
    while m <= end:
        for day in (1, 15):
            when = _payday(date(m.year, m.month, day))
            amount = -_cents(salary * float(rng.uniform(0.97, 1.03)))
            add(pay, when, f"PAYROLL {employer} DIR DEP {_ref(rng, 6)}", amount, pay.category_label)
        m = add_months(m, 1)
    income_per_month = 2 * salary

    rent = round(float(rng.uniform(0.3, 0.45)) * income_per_month, 0)
    rent_day = int(rng.integers(1, 4))
    rent_series = PlantedSeries(f"{account_id}-rent", account_id, Frequency.MONTHLY, "RENT PAYMENT ONLINE TRANSFER", "Payment")
    planted.append(rent_series)
    fixed = rent
    k = 0
    while True:
        when = _jitter(rng, add_months(date(start.year, start.month, rent_day), k), 1)
        if when > end:
            break
        add(rent_series, when, f"RENT PAYMENT ONLINE TRANSFER {_ref(rng)}", _cents(rent), "Payment")
        k += 1

    for template, label, (lo, hi) in [MONTHLY_BILLS[i] for i in sorted(rng.choice(len(MONTHLY_BILLS), 3, replace=False))]:
        amount = round(float(rng.uniform(lo, hi)), 2)
        day = int(rng.integers(3, 28))
        series = PlantedSeries(f"{account_id}-{template.split()[0].lower()}", account_id, Frequency.MONTHLY, template, label)
        planted.append(series)
        fixed += amount
        k = 0
        while True:
            when = _jitter(rng, add_months(date(start.year, start.month, day), k), 1)
            if when > end:
                break
            add(series, when, _render(template, rng, when), _cents(amount), label)
            k += 1

    for pool, freq in ((WEEKLY_HABITS, Frequency.WEEKLY), (BIWEEKLY_HABITS, Frequency.BIWEEKLY)):
        template, label, (lo, hi) = pool[int(rng.integers(len(pool)))]
        base_amount = float(rng.uniform(lo, hi))
        series = PlantedSeries(f"{account_id}-{template.split()[0].lower()}", account_id, freq, template, label)
        planted.append(series)
        period = freq.backtrack_days
        fixed += base_amount * 30.4 / period
        anchor = start + timedelta(days=int(rng.integers(0, period)))
        k = 0
        while True:
            when = _jitter(rng, anchor + timedelta(days=k * period), 1)
            if when > end:
                break
            amount = _cents(base_amount * float(rng.uniform(0.9, 1.1)))
            add(series, when, _render(template, rng, when), amount, label)
            k += 1

    # discretionary spending absorbs most of what income leaves over
    budget = max(income_per_month - fixed, 150.0) * float(rng.uniform(0.9, 1.0))
    # sparse visits spread over many merchants keep chance periodicity rare
    rate = float(rng.uniform(0.5, 1.0))  # noise transactions per day
    mean_amount = budget / 30.4 / rate * 0.9
    sigma = 0.8
    mu = np.log(mean_amount) - sigma ** 2 / 2
    merchants = NOISE_MERCHANTS
    weights = rng.dirichlet(np.full(len(merchants), 8.0))
    d = start
    while d <= end:
        for _ in range(int(rng.poisson(rate))):
            template, label = merchants[int(rng.choice(len(merchants), p=weights))]
            amount = float(np.clip(rng.lognormal(mu, sigma), 1.0, 12 * mean_amount))
            add(None, d, _render(template, rng, d), _cents(amount), label)
        if rng.random() < 1 / 45:
            template, label = ONE_OFF_BILLS[int(rng.integers(len(ONE_OFF_BILLS)))]
            add(None, d, _render(template, rng, d), _cents(float(rng.uniform(30, 250))), label)
        if rng.random() < 1 / 110:
            template, label = LARGE[int(rng.integers(len(LARGE)))]
            add(None, d, _render(template, rng, d), _cents(float(rng.uniform(300, 1500))), label)
        if rng.random() < 1 / 60:
            add(None, d, "INTEREST PAID", -int(rng.integers(1, 40)), "Interest")
        d += timedelta(days=1)
    opening = _cents(float(rng.uniform(100, 1500)))
    return txs, planted, opening


def wagegoal_fixture(n_accounts: int = 20, seed: int = 2018, start: date = START, end: date = END) -> SyntheticLedger:
    rng = np.random.default_rng(seed)
    accounts: dict[str, Account] = {}
    txs: list[Transaction] = []
    planted: list[PlantedSeries] = []
    for k in range(n_accounts):
        acc = f"{k + 1:03d}"
        acc_txs, acc_planted, opening = generate_account(rng, acc, start, end)
        balance = opening - sum(t.amount_cents for t in acc_txs)
        accounts[acc] = Account(acc, f"U{k + 1:02d}", AccountKind.CHECKING, balance, end)
        txs.extend(acc_txs)
        planted.extend(acc_planted)
    ledger = Ledger(accounts, tuple(txs), None, Step.DAILY)
    lo, hi = ledger.date_range()
    train_end = lo + timedelta(days=round((hi - lo).days * 0.75))
    return SyntheticLedger(Ledger(accounts, ledger.transactions, train_end, Step.DAILY), planted)


TRUTH_HEADER = ["series_id", "account_id", "frequency", "description", "category", "date", "amount"]


def write_truth(planted: list[PlantedSeries], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for p in planted:
            for when, cents in sorted(p.occurrences):
                w.writerow([p.series_id, p.account_id, p.frequency.label, p.description, p.category_label, when.isoformat(), cents / 100])


def read_truth(path: str | Path) -> list[PlantedSeries]:
    series: dict[str, PlantedSeries] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            p = series.get(row["series_id"])
            if p is None:
                p = series[row["series_id"]] = PlantedSeries(
                    row["series_id"], row["account_id"], Frequency[row["frequency"].upper()], row["description"], row["category"]
                )
            p.occurrences.append((date.fromisoformat(row["date"]), _cents(float(row["amount"]))))
    return list(series.values())


def write_fixture(fx: SyntheticLedger, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_wagegoal_csv(fx.ledger, out / "ledger.csv")
    write_balances_csv(fx.ledger, out / "balances.csv")
    write_truth(fx.planted, out / "recurring_truth.csv")
    (out / "split.txt").write_text(f"train_end={fx.ledger.train_end.isoformat()}\n")


def pkdd_fixture_file(
    path: str | Path,
    n_accounts: int = 12,
    seed: int = 1999,
    start: date = date(1993, 1, 1),
    end: date = date(1998, 12, 31),
    short_accounts: int = 2,
) -> None:
    """Write a small file in the PKDD'99 ``trans.asc`` layout.

    Accounts carry a monthly salary credit, monthly standing orders and
    random withdrawals; ``short_accounts`` of them span under four years.
    """
    rng = np.random.default_rng(seed)
    rows = []
    tid = 1
    for k in range(n_accounts):
        acc = str(1000 + k)
        short = k < short_accounts
        opened = start + timedelta(days=int(rng.integers(0, 60 if not short else 900)))
        last = end if not short else opened + timedelta(days=int(rng.integers(400, 1400)))
        salary = float(rng.uniform(8000, 40000))
        order = salary * float(rng.uniform(0.2, 0.4))
        pay_day = int(rng.integers(1, 28))
        order_day = int(rng.integers(1, 28))
        bal = 0.0
        d = opened
        while d <= last:
            events = []
            if d.day == pay_day:
                events.append(("PRIJEM", round(salary * float(rng.uniform(0.98, 1.02)), 1)))
            if d.day == order_day:
                events.append(("VYDAJ", round(order, 1)))
            if rng.random() < 0.06:
                events.append(("VYBER" if rng.random() < 0.5 else "VYDAJ", round(float(rng.uniform(0.05, 0.35)) * salary, 1)))
            for kind, amount in events:
                bal += amount if kind == "PRIJEM" else -amount
                rows.append((tid, acc, d, kind, amount, round(bal, 1)))
                tid += 1
            d += timedelta(days=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write('"trans_id";"account_id";"date";"type";"operation";"amount";"balance";"k_symbol";"bank";"account"\n')
        for tid, acc, d, kind, amount, bal in rows:
            fh.write(f'{tid};{acc};"{d:%y%m%d}";"{kind}";"";{amount};{bal};"";"";\n')


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="Write the shipped synthetic fixtures")
    parser.add_argument("--out", default="fixtures")
    parser.add_argument("--seed", type=int, default=2018)
    parser.add_argument("--accounts", type=int, default=20)
    args = parser.parse_args(argv)
    write_fixture(wagegoal_fixture(args.accounts, args.seed), Path(args.out) / "wagegoal_synth")
    pkdd_fixture_file(Path(args.out) / "pkdd99_sample.asc")


if __name__ == "__main__":
    main()
