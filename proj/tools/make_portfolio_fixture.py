#!/usr/bin/env python3
"""Writes the synthetic portfolio-rebalancing trace bundle to fixtures/portfolio/."""
import json
import os
import sys

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "fixtures", "portfolio")

ORCH = "MagenticOneOrchestrator"
TICKERS = {
    "r1": ["AAPL", "MSFT", "VTI"],
    "r2": ["AAPL", "MSFT", "BND"],
    "r3": ["AAPL", "VTI", "BND"],
    "r4": ["MSFT", "VTI", "BND"],
    "r5": ["AAPL", "MSFT", "VTI"],
}
CASH = {"r1": "12,400", "r2": "9,850", "r3": "11,200", "r4": "10,300", "r5": "12,050"}
STALL_RETRIES = {"r1": 4, "r2": 5}
WEB_TRIES = {"r3": 1, "r4": 2, "r5": 2}


class Run:
    def __init__(self, run_id):
        self.run_id = run_id
        self.records = []

    def add(self, agent, role, content, context, tokens=(0, 0)):
        rec = {
            "run_id": self.run_id,
            "step_index": len(self.records),
            "agent_name": agent,
            "role": role,
            "content": content,
            "metadata": {"context": context},
        }
        if tokens != (0, 0):
            rec["token_usage"] = {"input": tokens[0], "output": tokens[1]}
        self.records.append(rec)

    def orch(self, content, context):
        self.add(ORCH, "instruction", content, context, (180 + 7 * len(self.records), 40 + len(content) // 4))


def common_prefix(run, tickers, cash):
    t = ", ".join(tickers)
    run.orch("Holdings step: ask FileSurfer to open holdings.csv and list the portfolio holdings positions.", "file")
    run.add("FileSurfer", "tool_call", "open_file('holdings.csv')", "file")
    run.add("FileSurfer", "tool_result", f"holdings.csv rows: {t} with share counts 40, 25, 60.", "file")
    run.orch(f"Holdings step done: portfolio holdings positions listed from holdings.csv ({t}).", "file")
    run.orch("Cash step: ask FileSurfer to read the available cash balance from account_summary.txt.", "file")
    run.add("FileSurfer", "tool_call", "open_file('account_summary.txt')", "file")
    run.add("FileSurfer", "tool_result", f"account_summary.txt: available cash balance ${cash}.", "file")
    run.orch(f"Cash step done: available cash balance ${cash} read from account_summary.txt.", "file")


def web_attempt(run, tickers, first):
    t = ", ".join(tickers)
    if first:
        run.orch(f"Prices step: ask WebSurfer to search the web for current market quote prices of {t}.", "web")
    else:
        run.orch(f"Prices step: WebSurfer hit a reCAPTCHA wall and the search is blocked; ask WebSurfer to retry the web search for market quote prices of {t}.", "web")
    run.add("WebSurfer", "tool_call", f"web_search('current stock price {tickers[0]}')", "web")
    run.add("WebSurfer", "tool_result",
            "Results page replaced by a reCAPTCHA challenge: verification required, unusual traffic detected. Access blocked.",
            "web")


def script_pivot(run, tickers):
    t = ", ".join(tickers)
    run.orch("Prices step: WebSurfer hit a reCAPTCHA wall and the search is blocked; switch strategy to scripting.", "web")
    run.orch(f"Script step: ask Coder to write a Python quotes script that downloads market quote prices for {t} from a quotes API.", "script")
    run.add("Coder", "response",
            "```python\nimport json, urllib.request\nquotes = json.load(urllib.request.urlopen(QUOTES_API + '?symbols=' + SYMBOLS))\nprint(quotes)\n```",
            "script", (420, 150))
    run.orch("Script step: ask ComputerTerminal to run the Python quotes script and print the market quote prices.", "script")
    run.add("ComputerTerminal", "tool_call", "python fetch_quotes.py", "script")
    run.add("ComputerTerminal", "tool_result", f"{tickers[0]} 189.20  {tickers[1]} 412.55  {tickers[2]} 238.10", "script")
    run.orch(f"Script step done: market quote prices for {t} retrieved by the Python quotes script.", "script")


def rebalance_and_orders(run, tickers):
    run.orch("Rebalance step: ask Coder to compute rebalancing trades toward the target allocation weights.", "plan")
    run.add("Coder", "response",
            "```python\ntargets = {'equity': 0.6, 'bonds': 0.4}\ntrades = rebalance(holdings, prices, cash, targets)\nprint(trades)\n```",
            "plan", (510, 160))
    run.add("ComputerTerminal", "tool_result", f"SELL 10 {tickers[0]}; BUY 25 {tickers[2]}", "plan")
    run.orch(f"Rebalance step done: rebalancing trades computed toward target allocation weights, sell {tickers[0]} and buy {tickers[2]}.", "plan")
    run.orch("Orders step: ask WebSurfer to log in to the brokerage site and submit the buy and sell orders.", "orders")
    run.add("WebSurfer", "tool_call", "visit_page('https://broker.example/login')", "orders")
    run.add("WebSurfer", "tool_result", "Login requires a two-factor code sent to the account owner's phone.", "orders")
    run.orch("Orders step failed: brokerage site login needs a two-factor code, so the buy and sell orders were not submitted to the brokerage site.", "orders")


def build():
    runs = []
    for run_id, tickers in TICKERS.items():
        run = Run(run_id)
        common_prefix(run, tickers, CASH[run_id])
        if run_id in STALL_RETRIES:
            for i in range(STALL_RETRIES[run_id]):
                web_attempt(run, tickers, first=(i == 0))
            run.orch("Prices step failed: unable to get market quote prices, every web search is blocked by reCAPTCHA.", "web")
        else:
            for i in range(WEB_TRIES[run_id]):
                web_attempt(run, tickers, first=(i == 0))
            script_pivot(run, tickers)
            rebalance_and_orders(run, tickers)
        run.records[-1]["metadata"]["run_outcome"] = "failure"
        runs.append(run)
    return runs


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "traces.jsonl"), "w") as f:
        for run in build():
            for rec in run.records:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(os.path.join(OUT, "task.json"), "w") as f:
        json.dump({
            "task_id": "portfolio-rebalance",
            "task_description": "Rebalance the stock portfolio: read current holdings and cash, look up current market prices, "
                                "compute trades toward the target allocation, and place the buy and sell orders.",
        }, f, indent=2)
        f.write("\n")
    with open(os.path.join(OUT, "alias_map.json"), "w") as f:
        json.dump({ORCH: "Orchestrator", "WebSurfer": "Web", "FileSurfer": "File",
                   "Coder": "Coder", "ComputerTerminal": "Terminal"}, f, indent=2, sort_keys=True)
        f.write("\n")
    actions = [
        {"type": "rename", "id": "n1", "title": "Portfolio holdings", "description": "Current positions read from holdings.csv."},
        {"type": "rename", "id": "n2", "title": "Cash balance", "description": "Available cash read from the account summary."},
        {"type": "merge", "ids": ["n3", "n7", "n4"], "title": "Market prices"},
        {"type": "rename", "id": "n8", "description": "Current market quote prices for every held ticker."},
        {"type": "rename", "id": "n5", "title": "Rebalancing trades", "description": "Trades toward the target allocation weights."},
        {"type": "rename", "id": "n6", "title": "Buy and sell orders", "description": "Orders submitted through the brokerage site."},
        {"type": "confirm", "id": "n1"},
        {"type": "confirm", "id": "n2"},
        {"type": "confirm", "id": "n8"},
        {"type": "confirm", "id": "n5"},
        {"type": "confirm", "id": "n6"},
    ]
    with open(os.path.join(OUT, "actions.jsonl"), "w") as f:
        for a in actions:
            f.write(json.dumps(a, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
