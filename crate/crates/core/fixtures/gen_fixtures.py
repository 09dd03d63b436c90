#!/usr/bin/env python3
"""Regenerates the simulated apps, bug reports, mock scripts and manifests.

Run from anywhere: python3 crates/core/fixtures/gen_fixtures.py
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent

# Characters escaped by the Rust regex crate's `regex::escape`.
_META = set("\\.+*?()|[]{}^$#&-~")


def rx(text):
    return "".join("\\" + c if c in _META else c for c in text)


def xml_attr(value):
    return (
        value.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("\n", "&#10;")
    )


class W:
    """One widget of a screen; `children` nest one level for lists."""

    def __init__(self, cls, text=None, desc=None, rid=None, click=False, long=False,
                 edit=False, scroll=False, enabled=True, children=()):
        self.cls, self.text, self.desc, self.rid = cls, text, desc, rid
        self.click, self.long, self.edit, self.scroll = click, long, edit, scroll
        self.enabled = enabled
        self.children = list(children)

    def xml(self):
        attrs = [("class", self.cls)]
        for name, value in (("text", self.text), ("content-desc", self.desc), ("resource-id", self.rid)):
            if value:
                attrs.append((name, value))
        for name, flag in (("clickable", self.click), ("long-clickable", self.long),
                           ("editable", self.edit), ("scrollable", self.scroll)):
            if flag:
                attrs.append((name, "true"))
        if not self.enabled:
            attrs.append(("enabled", "false"))
        head = "<node " + " ".join(f'{k}="{xml_attr(v)}"' for k, v in attrs)
        if not self.children:
            return head + "/>"
        return head + ">" + "".join(c.xml() for c in self.children) + "</node>"

    def render(self):
        out = "<" + self.cls.rsplit(".", 1)[-1]
        for name, value in (("android:text", self.text), ("android:content-desc", self.desc),
                            ("android:resource-id", self.rid)):
            if value:
                out += f' {name}="{xml_attr(value)}"'
        return out + "/>"

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def button(text, **kw):
    return W("android.widget.Button", text=text, click=True, **kw)


def label(text, **kw):
    return W("android.widget.TextView", text=text, **kw)


def row(text, long=False, **kw):
    return W("android.widget.TextView", text=text, click=True, long=long, **kw)


def icon(desc, rid, **kw):
    return W("android.widget.ImageButton", desc=desc, rid=rid, click=True, **kw)


def field(hint, rid, **kw):
    return W("android.widget.EditText", text=hint, rid=rid, click=True, edit=True, **kw)


def listing(rid, *children, scroll=False):
    return W("android.widget.ListView", rid=rid, scroll=scroll, children=children)


# ---- action patterns -------------------------------------------------------

def click(text=None, rid=None, node=None):
    return _pattern("Click", text, rid, node)


def long_click(text=None, rid=None, node=None):
    return _pattern("LongClick", text, rid, node)


def type_in(rid, text):
    p = _pattern("InputText", None, rid, None)
    p["text"] = text
    return p


def swipe(direction, rid=None):
    p = _pattern("Swipe", None, rid, None)
    p["direction"] = direction
    return p


def rotate():
    return {"kind": "Rotate"}


def press(key):
    return {"kind": "Press", "key": key}


def _pattern(kind, text, rid, node):
    p = {"kind": kind}
    if rid is not None:
        p["target_resource_id"] = rid
    if text is not None:
        p["target_text"] = text
    if node is not None:
        p["target_node"] = node
    return p


def matcher_of(pattern):
    on = {k: v for k, v in pattern.items() if k != "text"}
    if "text" in pattern:
        on["input_pattern"] = "^" + rx(pattern["text"]) + "$"
    return on


class App:
    def __init__(self, name, initial):
        self.name, self.initial = name, initial
        self.states = {}
        self.rules = []
        self.bugs = []
        self.gt = []  # (from, pattern, to)
        self.gt_bug = None

    def screen(self, key, activity, visual, *widgets):
        assert "  " not in visual and "\n" not in visual, visual
        self.states[key] = (activity, list(widgets), visual)

    def on(self, frm, pattern, to, effects=None, when=None):
        on = matcher_of(pattern)
        if when:
            on["when"] = when
        rule = {"from": frm, "on": on, "to": to}
        if effects:
            rule["effects"] = effects
        self.rules.append(rule)

    def step(self, frm, pattern, to, effects=None, when=None):
        self.on(frm, pattern, to, effects, when)
        self.gt.append((frm, pattern, to, when))

    def back(self, frm, to):
        self.on(frm, press("Back"), to)

    def crash(self, bug_id, trigger, log):
        self.bugs.append({"id": bug_id, "kind": "Crash", "trigger": trigger, "crash_log": log})
        self.gt_bug = self.gt_bug or bug_id

    def non_crash(self, bug_id, trigger, symptom):
        self.bugs.append({"id": bug_id, "kind": "NonCrash", "trigger": trigger, "symptom": symptom})
        self.gt_bug = self.gt_bug or bug_id

    # -- derived values used by the mock scripts --

    def widgets(self, key):
        root = W("android.widget.FrameLayout", children=self.states[key][1])
        return list(root.walk())

    def hierarchy(self, key):
        return W("android.widget.FrameLayout", children=self.states[key][1]).xml()

    def target(self, key, pattern):
        nodes = self.widgets(key)
        if "target_node" in pattern:
            return nodes[pattern["target_node"]]
        for w in nodes:
            if "target_resource_id" in pattern and w.rid != pattern["target_resource_id"]:
                continue
            if "target_text" in pattern and w.text != pattern["target_text"]:
                continue
            return w
        raise KeyError(f"{self.name}: no target for {pattern} in {key}")

    def describe(self, key, pattern):
        kind = pattern["kind"]
        if kind == "Rotate":
            return "rotate the screen"
        if kind == "Press":
            return f"press the {pattern['key']} key"
        if kind == "Swipe" and not _has_target(pattern):
            return f"swipe {pattern['direction']}"
        widget = "widget " + self.target(key, pattern).render()
        return {
            "Click": lambda: f"click {widget}",
            "LongClick": lambda: f"long-click {widget}",
            "InputText": lambda: f'input "{pattern["text"]}" in {widget}',
            "Swipe": lambda: f"swipe {pattern['direction']} on {widget}",
        }[kind]()

    def filter_item(self, key, pattern):
        """Regex for the ActionFilter item of `pattern` on screen `key`."""
        kind = pattern["kind"]
        tag = {"Swipe": f"Swipe({pattern.get('direction')})", "Press": f"Press({pattern.get('key')})"}.get(kind, kind)
        where = "(device)" if not _has_target(pattern) else self.target(key, pattern).render()
        return "^#\\d+ " + rx(tag + " " + where) + "$"

    def visual(self, key):
        return self.states[key][2]

    def document(self):
        states = {
            k: {"activity": a, "hierarchy_xml": self.hierarchy(k), "visual": v}
            for k, (a, _, v) in self.states.items()
        }
        doc = {
            "schema": 1,
            "app_name": self.name,
            "initial_state": self.initial,
            "states": states,
            "rules": self.rules,
            "bugs": self.bugs,
        }
        if self.gt:
            doc["ground_truth"] = {"bug": self.gt_bug, "path": [p for _, p, _, _ in self.gt]}
        return doc


def _has_target(pattern):
    return any(k in pattern for k in ("target_text", "target_resource_id", "target_node"))


CRASHED = ("CrashDialog", "The system dialog says the app has stopped")


def crash_screen(app, key="crashed"):
    app.screen(key, CRASHED[0], CRASHED[1], button("Close app"))


# ---- mock scripts ----------------------------------------------------------

class Script:
    def __init__(self, app, spec, inputs=None, extra_keeps=(), summaries=None, loose=False, lookalike=None):
        self.app, self.spec = app, spec
        self.inputs = inputs or {}
        self.extra_keeps = list(extra_keeps)
        self.summaries = summaries or {}
        self.loose = loose
        self.lookalike = lookalike

    def summary(self, index):
        frm, pattern, to, _ = self.app.gt[index]
        if index in self.summaries:
            return self.summaries[index]
        return f"{self.app.describe(frm, pattern)}; the screen now shows: {self.app.visual(to)}"

    def rules(self):
        app = self.app
        rules = [{"role": "ReportAnalysis", "respond": self.spec}]
        for rid, text in self.inputs.items():
            rules.append({"role": "InputTextGen", "regex": "### Widget\\n[^\\n]*" + rx(f'android:resource-id="{rid}"'),
                          "respond": {"text": text}})

        keeps = []
        for frm, pattern, _, _ in app.gt:
            keeps.append(app.filter_item(frm, pattern))
        for frm, pattern in self.extra_keeps:
            keeps.append(app.filter_item(frm, pattern))
        for regex in dict.fromkeys(keeps):
            rules.append({"role": "ActionFilter", "scope": "item", "regex": regex, "respond": "keep"})

        for index, text in self.summaries.items():
            frm, pattern, to, _ = app.gt[index]
            regex = (
                "### Action\\n" + rx(app.describe(frm, pattern)) + "\\n### End action"
                "(?s:.*)### After state\\nActivity: [^\\n]*\\nScreen: " + rx(app.visual(to)) + "\\n"
            )
            rules.append({"role": "TransitionSummary", "regex": regex, "respond": {"summary": text}})

        rules.append({"role": "PathEvaluation", "scope": "item",
                      "match": "; the app crashed with the following error log:", "respond": "success"})
        last = len(app.gt) - 1
        final_is_symptom = app.bugs[0]["kind"] == "NonCrash"
        for index in reversed(range(len(app.gt))):
            frm, pattern, to, _ = app.gt[index]
            if app.states[to][0] == CRASHED[0]:
                continue
            decision = "success" if final_is_symptom and index == last else "continue"
            if self.lookalike == index:
                rules.append({"role": "PathEvaluation", "scope": "item",
                              "regex": "\\n\\(\\d+\\) [^\\n]*the screen now shows: " + rx(app.visual(to)) + "$",
                              "respond": decision})
            if self.loose or self.lookalike == index:
                regex = "\\n\\(\\d+\\) " + rx(app.describe(frm, pattern)) + "(?:;[^\\n]*)?$"
            elif index == 0:
                regex = "^\\[path \\d+\\]\\n\\(1\\) " + rx(one_line(self.summary(0))) + "$"
            else:
                regex = ("\\n\\(\\d+\\) " + rx(one_line(self.summary(index - 1)))
                         + "\\n\\(\\d+\\) " + rx(one_line(self.summary(index))) + "$")
            rules.append({"role": "PathEvaluation", "scope": "item", "regex": regex, "respond": decision})

        rules.append({"role": "BugVerification", "regex": "### After state\\nThe app crashed",
                      "respond": {"confirmed": True, "evidence": "the app crashed"}})
        for bug in app.bugs:
            if bug["kind"] == "NonCrash":
                rules.append({"role": "BugVerification",
                              "regex": "### After state\\n(?s:.*)Screen: [^\\n]*" + rx(bug["symptom"]),
                              "respond": {"confirmed": True, "evidence": "the screen shows " + bug["symptom"]}})
        return rules


def one_line(text):
    return " ".join(text.split())


def spec(steps, symptoms, crash):
    return {"steps": steps, "symptoms": symptoms, "expects_crash": crash}


# ---- the main suite --------------------------------------------------------

def calc():
    app = App("calc-mini", "keypad")
    app.screen("keypad", "CalculatorActivity", "Calculator keypad; the display is empty",
               label("", rid="display"), button("7"), button("+"), button("="), button("C"))
    app.screen("seven", "CalculatorActivity", "Calculator keypad; the display shows 7",
               label("7", rid="display"), button("7"), button("+"), button("="), button("C"))
    crash_screen(app)
    app.step("keypad", click("="), "crashed")
    app.on("keypad", click("7"), "seven")
    app.on("seven", click("C"), "keypad")
    app.crash("equals-on-empty", "crashed",
              "FATAL EXCEPTION: main\njava.lang.NumberFormatException: empty String\n"
              "\tat org.calc.Evaluator.parse(Evaluator.java:41)")
    report = """Title: Pressing equals with nothing typed crashes the calculator

Open the calculator and press = before entering any number. The app closes immediately.

--- comment ---
Same on a fresh install.
"""
    script = Script(app, spec(["Open the calculator", "Press = with an empty display"],
                              ["The calculator crashes with a NumberFormatException"], True))
    return app, report, script


def music():
    app = App("music-mini", "songs")
    app.screen("songs", "LibraryActivity", "Library tab listing two songs, Morning Light and Night Drive",
               listing("songs", row("Morning Light"), row("Night Drive")), button("Playlists"), button("Albums"))
    app.screen("player", "PlayerActivity", "Now playing screen with album art and a pause button",
               icon("Pause", "pause"))
    app.screen("albums", "LibraryActivity", "Albums tab showing one album cover",
               row("Late Nights"), button("Playlists"))
    app.screen("playlists", "LibraryActivity", "Playlists tab; there are no playlists yet",
               label("No playlists"), button("Shuffle all"), button("New playlist"))
    app.screen("new_playlist", "PlaylistEditor", "Dialog asking for a playlist name",
               field("Playlist name", "name"), button("Cancel"))
    crash_screen(app)
    app.step("songs", click("Playlists"), "playlists")
    app.step("playlists", click("Shuffle all"), "crashed")
    app.on("songs", click("Morning Light"), "player")
    app.on("songs", click("Night Drive"), "player")
    app.on("songs", click("Albums"), "albums")
    app.on("albums", click("Playlists"), "playlists")
    app.on("playlists", click("New playlist"), "new_playlist")
    app.on("new_playlist", click("Cancel"), "playlists")
    app.back("player", "songs")
    app.back("playlists", "songs")
    app.crash("shuffle-empty", "crashed",
              "FATAL EXCEPTION: main\njava.lang.IndexOutOfBoundsException: Index: 0, Size: 0\n"
              "\tat org.music.Queue.shuffle(Queue.java:88)")
    report = """Title: Shuffle all crashes when there are no playlists

1. Open the Playlists tab
2. Tap Shuffle all

The app force closes.
"""
    script = Script(app, spec(["Open the Playlists tab", "Tap Shuffle all"],
                              ["The player crashes with an IndexOutOfBoundsException"], True),
                    extra_keeps=[("songs", click("Albums"))])
    return app, report, script


def notes():
    app = App("notes-dup", "list")
    app.screen("list", "NotesActivity", "Notes list with a single note titled Groceries",
               row("Groceries", long=True), icon("New note", "fab"))
    app.screen("editor", "EditorActivity", "Note editor showing the Groceries checklist",
               field("Milk, eggs", "body"))
    app.screen("selected", "NotesActivity", "Groceries is highlighted and the toolbar offers Duplicate and Delete",
               row("Groceries", long=True), icon("Duplicate", "duplicate"), icon("Delete", "delete"))
    app.screen("confirm", "NotesActivity", "A dialog asks whether to duplicate the note",
               button("OK"), button("Cancel"))
    app.screen("deleted", "NotesActivity", "The notes list is empty",
               icon("New note", "fab"))
    app.screen("doubled", "NotesActivity",
               "Notes list shows Groceries three times: the original plus two identical copies of the duplicated note",
               row("Groceries", long=True), row("Groceries", long=True), row("Groceries", long=True))
    app.step("list", long_click("Groceries"), "selected")
    app.step("selected", click(rid="duplicate"), "confirm")
    app.step("confirm", click("OK"), "doubled")
    app.on("list", click("Groceries"), "editor")
    app.on("selected", click(rid="delete"), "deleted")
    app.on("confirm", click("Cancel"), "selected")
    app.back("editor", "list")
    app.back("selected", "list")
    app.non_crash("double-duplicate", "doubled", "two identical copies of the duplicated note")
    report = """Title: Duplicating a note creates two copies

Steps:
1. Long press the Groceries note
2. Choose Duplicate in the toolbar
3. Confirm with OK

Expected one copy, but the list now has two identical copies of the duplicated note.

--- comment ---
Reproducible on 2.3.1.
--- comment ---
Probably the confirm handler runs twice.
"""
    script = Script(app, spec(["Long press the Groceries note", "Choose Duplicate", "Confirm with OK"],
                              ["two identical copies of the duplicated note"], False),
                    extra_keeps=[("selected", click(rid="delete"))])
    return app, report, script


def anki():
    app = App("anki-mini", "decks")
    app.screen("decks", "DeckPicker", "Deck list with Default and Spanish decks",
               row("Default"), row("Spanish"), icon("Sync", "sync"))
    app.screen("spanish", "Overview", "Overview of the Spanish deck; 0 cards due",
               button("Study now", enabled=False))
    app.screen("overview", "Overview", "Overview of the Default deck with 1 card due",
               button("Study now"), button("Options"))
    app.screen("options", "DeckOptions", "Deck options with new card limits",
               field("20", "limit"))
    app.screen("front", "Reviewer", "Reviewer shows the question side of the last due card",
               button("Show answer"))
    app.screen("back", "Reviewer", "Reviewer shows the answer with Again, Good and Easy buttons",
               button("Again"), button("Good"), button("Easy"))
    crash_screen(app)
    app.step("decks", click("Default"), "overview")
    app.step("overview", click("Study now"), "front")
    app.step("front", click("Show answer"), "back")
    app.step("back", click("Easy"), "crashed")
    app.on("decks", click("Spanish"), "spanish")
    app.on("overview", click("Options"), "options")
    app.on("back", click("Again"), "front")
    app.back("spanish", "decks")
    app.back("overview", "decks")
    app.back("options", "overview")
    app.crash("easy-last-card", "crashed",
              "FATAL EXCEPTION: main\njava.lang.NullPointerException: Attempt to read field 'due' on a null object "
              "reference\n\tat com.anki.Scheduler.answer(Scheduler.java:212)")
    report = """Title: Crash after answering Easy on the last card

Open the Default deck, start studying, show the answer and pick Easy on the last due card. Crash.
"""
    script = Script(app, spec(["Open the Default deck", "Tap Study now", "Show the answer", "Answer Easy"],
                              ["The reviewer crashes with a NullPointerException"], True),
                    extra_keeps=[("overview", click("Options")), ("back", click("Good"))])
    return app, report, script


def weather():
    days = [row(d) for d in ("Mon 18°", "Tue 21°", "Wed 19°")]
    app = App("weather-mini", "cities")
    app.screen("cities", "CitiesActivity", "Saved cities: Berlin and Lisbon",
               row("Berlin"), row("Lisbon"), icon("Add city", "add"))
    app.screen("lisbon", "ForecastActivity", "Lisbon forecast showing sunny days",
               label("Lisbon"))
    app.screen("forecast", "ForecastActivity", "Berlin forecast scrolled to the top with three days visible",
               listing("forecast", *days, scroll=True))
    app.screen("forecast_end", "ForecastActivity",
               "Berlin forecast scrolled to the end; an Extended forecast link is visible",
               listing("forecast", *days, scroll=True), button("Extended forecast"))
    app.screen("extended", "ExtendedActivity", "Fourteen day forecast in Celsius with a unit toggle",
               listing("extended", *days, scroll=True), button("°F"))
    app.screen("extended_f", "ExtendedActivity", "Fourteen day forecast now in Fahrenheit",
               listing("extended", *days, scroll=True), button("°C"))
    crash_screen(app)
    app.step("cities", click("Berlin"), "forecast")
    app.step("forecast", swipe("up", "forecast"), "forecast_end")
    app.step("forecast_end", click("Extended forecast"), "extended")
    app.step("extended", click("°F"), "extended_f")
    app.step("extended_f", swipe("down", "extended"), "crashed")
    app.on("cities", click("Lisbon"), "lisbon")
    app.on("forecast_end", swipe("down", "forecast"), "forecast")
    app.on("extended_f", click("°C"), "extended")
    app.back("lisbon", "cities")
    app.back("forecast", "cities")
    app.back("forecast_end", "cities")
    app.back("extended", "forecast_end")
    app.crash("refresh-after-unit-switch", "crashed",
              "FATAL EXCEPTION: main\njava.util.ConcurrentModificationException\n"
              "\tat org.weather.ForecastAdapter.refresh(ForecastAdapter.java:57)")
    report = """Title: Pull to refresh crashes after switching to Fahrenheit

1. Open Berlin
2. Scroll the forecast to the bottom
3. Open the extended forecast
4. Switch units to °F
5. Pull down to refresh

App crashes with ConcurrentModificationException.
"""
    script = Script(app, spec(["Open Berlin", "Scroll the forecast to the bottom", "Open the extended forecast",
                               "Switch units to °F", "Pull down to refresh"],
                              ["The app crashes with a ConcurrentModificationException"], True),
                    extra_keeps=[("cities", click("Lisbon"))])
    return app, report, script


def diary():
    app = App("diary-mini", "entries")
    app.screen("entries", "DiaryActivity", "Empty diary with a button for a new entry",
               icon("New entry", "fab"), icon("Search", "search"))
    app.screen("search", "SearchActivity", "Search screen with no results", field("Search", "query"))
    app.screen("editor", "EditorActivity", "Blank entry editor with title and body fields",
               field("Title", "title"), field("Write something", "body"), icon("Attach photo", "attach"))
    app.screen("titled", "EditorActivity", "Entry editor with the title Trip and an empty body",
               field("Trip", "title"), field("Write something", "body"), icon("Attach photo", "attach"))
    app.screen("written", "EditorActivity", "Entry editor with the title Trip and a short body text",
               field("Trip", "title"), field("Lovely weekend at the lake", "body"), icon("Attach photo", "attach"))
    app.screen("picker", "PhotoPicker", "Photo picker listing recent images",
               row("IMG_0042"), button("Cancel"))
    app.screen("attached", "EditorActivity", "Entry editor with an empty photo placeholder under the body",
               field("Trip", "title"), field("Lovely weekend at the lake", "body"), button("Save"))
    app.screen("saved", "DiaryActivity", "Diary list with one entry titled Trip",
               row("Trip"), icon("New entry", "fab"))
    app.screen("with_photo", "EditorActivity", "Entry editor with a lake photo attached",
               field("Trip", "title"), button("Save"))
    crash_screen(app)
    app.step("entries", click(rid="fab"), "editor")
    app.step("editor", type_in("title", "Trip"), "titled")
    app.step("titled", type_in("body", "Lovely weekend at the lake"), "written")
    app.step("written", click(rid="attach"), "picker")
    app.step("picker", click("Cancel"), "attached")
    app.step("attached", click("Save"), "saved")
    app.step("saved", click("Trip"), "crashed")
    app.on("entries", click(rid="search"), "search")
    app.on("picker", click("IMG_0042"), "with_photo")
    app.back("search", "entries")
    app.back("editor", "entries")
    app.crash("cancelled-attachment", "crashed",
              "FATAL EXCEPTION: main\njava.lang.NullPointerException: uri must not be null\n"
              "\tat org.diary.EntryView.bindPhoto(EntryView.java:130)")
    report = """Title: Opening an entry whose photo pick was cancelled crashes

1. Create a new entry
2. Title it Trip and write a short body
3. Tap attach photo, then cancel the picker
4. Save the entry
5. Open the Trip entry from the list

Crash on open.
--- comment ---
Entries with a real photo open fine.
"""
    script = Script(app, spec(["Create a new entry", "Enter the title Trip", "Write a short body",
                               "Tap attach photo and cancel", "Save the entry", "Open the Trip entry"],
                              ["Opening the entry crashes with a NullPointerException"], True),
                    inputs={"title": "Trip", "body": "Lovely weekend at the lake"},
                    extra_keeps=[("picker", click("IMG_0042"))])
    return app, report, script


def habits():
    app = App("habits-mini", "home")
    app.screen("home", "HabitsActivity", "No habits yet; a button invites you to add one",
               icon("Add habit", "fab"), icon("Settings", "settings"))
    app.screen("settings", "SettingsActivity", "Settings with theme and reminder options", row("Dark theme"))
    app.screen("form", "HabitForm", "New habit form with an empty name",
               field("Habit name", "name"), button("Daily"), button("Weekly"), button("Save", enabled=False))
    app.screen("named", "HabitForm", "New habit form for Read with no frequency chosen",
               field("Read", "name"), button("Daily"), button("Weekly"), button("Save", enabled=False))
    app.screen("daily", "HabitForm", "New habit form for Read repeating daily",
               field("Read", "name"), button("Daily"), button("Weekly"), button("Save"))
    app.screen("weekly", "HabitForm", "New habit form for Read repeating weekly",
               field("Read", "name"), button("Daily"), button("Weekly"), button("Save"))
    app.screen("list", "HabitsActivity", "Habit list with Read, not done today, streak 0 days",
               row("Read"), W("android.widget.CheckBox", desc="Done today", rid="check", click=True))
    app.screen("checked", "HabitsActivity", "Habit list with Read done today, streak 1 day",
               row("Read"), W("android.widget.CheckBox", desc="Done today", rid="check", click=True))
    app.screen("detail", "HabitDetail", "Detail page of Read showing a streak of 1 day",
               button("Edit history"), button("Archive"))
    app.screen("calendar", "HistoryEditor", "History calendar with today marked",
               row("Yesterday"), row("Two days ago"))
    app.screen("two_days", "HistoryEditor", "History calendar with today and two days ago marked; streak 1 day",
               row("Yesterday"), row("Two days ago"))
    app.screen("broken", "HistoryEditor",
               "History calendar with today and yesterday marked; the streak counter above still reads 0 days",
               row("Yesterday"), row("Two days ago"))
    app.screen("archived", "HabitsActivity", "Habit list is empty after archiving", icon("Add habit", "fab"))
    app.step("home", click(rid="fab"), "form")
    app.step("form", type_in("name", "Read"), "named")
    app.step("named", click("Daily"), "daily")
    app.step("daily", click("Save"), "list")
    app.step("list", click(rid="check"), "checked")
    app.step("checked", click("Read"), "detail")
    app.step("detail", click("Edit history"), "calendar")
    app.step("calendar", click("Yesterday"), "broken")
    app.on("home", click(rid="settings"), "settings")
    app.on("named", click("Weekly"), "weekly")
    app.on("weekly", click("Daily"), "daily")
    app.on("detail", click("Archive"), "archived")
    app.on("calendar", click("Two days ago"), "two_days")
    app.back("settings", "home")
    app.back("detail", "checked")
    app.back("calendar", "detail")
    app.non_crash("stale-streak", "broken", "the streak counter above still reads 0 days")
    report = """Title: Streak resets to zero after editing history

Create a daily habit called Read, save it, mark it done today, then open it and in Edit history also tick Yesterday.
The streak counter above still reads 0 days instead of 2.
"""
    script = Script(app, spec(["Add a daily habit named Read", "Save it", "Mark it done today", "Open the habit",
                               "Open Edit history", "Tick Yesterday"],
                              ["the streak counter above still reads 0 days"], False),
                    inputs={"name": "Read"},
                    extra_keeps=[("named", click("Weekly")), ("calendar", click("Two days ago"))])
    return app, report, script


def amaze():
    app = App("amaze-mini", "root")
    fab = icon("Add", "fab")
    app.screen("root", "MainActivity",
               "File browser at the storage root listing one folder named Alarms; a round add button sits bottom right",
               listing("files", row("Alarms")), fab)
    app.screen("root_fab", "MainActivity", "The add button expanded into a menu: Folder, File, Cloud connection",
               row("Folder"), row("File"), row("Cloud connection"))
    app.screen("alarms_empty", "MainActivity", "Inside folder Alarms; the list is empty and reads No files",
               label("No files"), fab)
    app.screen("alarms_fab", "MainActivity",
               "Inside Alarms the add button expanded into a menu: Folder, File, Cloud connection",
               row("Folder"), row("File"), row("Cloud connection"))
    app.screen("file_dialog", "CreateFileDialog", "Dialog titled Create file with an empty name field",
               field("Enter Name", "name"), button("CANCEL"))
    app.screen("dialog_empty", "CreateFolderDialog",
               "Dialog titled Create folder with an empty name field and a disabled CREATE button",
               field("Enter Name", "name"), button("CANCEL"), button("CREATE", enabled=False))
    app.screen("dialog_named", "CreateFolderDialog", "Dialog titled Create folder with test2 typed into the name field",
               field("test2", "name"), button("CANCEL"), button("CREATE"))
    app.screen("alarms_folder", "MainActivity", "Inside Alarms there is now one folder named test2",
               listing("files", row("test2", long=True)), fab)
    app.screen("selected", "MainActivity",
               "Folder test2 is highlighted; the toolbar switched to selection mode with a More options button",
               listing("files", row("test2", long=True)), icon("More options", "overflow"))
    app.screen("selected_menu", "MainActivity", "Overflow menu open with Cut, Copy, Rename and Delete",
               row("Cut"), row("Copy"), row("Rename"), row("Delete"))
    app.screen("inside", "MainActivity", "Inside folder test2, which is empty", label("No files"), fab)
    app.screen("inside_clip", "MainActivity",
               "Inside folder test2, which is empty; a Paste button waits in the toolbar",
               label("No files"), icon("Paste", "paste"))
    crash_screen(app)
    created = {"set": "created", "value": 1}
    app.on("root", click("Alarms"), "alarms_folder", when={"created": 1})
    app.step("root", click("Alarms"), "alarms_empty")
    app.step("alarms_empty", click(rid="fab"), "alarms_fab")
    app.step("alarms_fab", click("Folder"), "dialog_empty")
    app.step("dialog_empty", type_in("name", "test2"), "dialog_named")
    app.step("dialog_named", click("CREATE"), "alarms_folder", effects=[created])
    app.step("alarms_folder", long_click("test2"), "selected")
    app.step("selected", click(rid="overflow"), "selected_menu")
    app.step("selected_menu", click("Cut"), "alarms_folder", effects=[{"set": "clipboard", "value": "test2"}])
    app.step("alarms_folder", click("test2"), "inside_clip", when={"clipboard": "test2"})
    app.on("alarms_folder", click("test2"), "inside")
    app.step("inside_clip", click(rid="paste"), "crashed")
    app.on("root", click(rid="fab"), "root_fab")
    for item in ("Folder", "File", "Cloud connection"):
        app.on("root_fab", click(item), "root")
    app.on("alarms_fab", click("File"), "file_dialog")
    app.on("alarms_fab", click("Cloud connection"), "alarms_empty")
    app.on("file_dialog", click("CANCEL"), "alarms_empty")
    app.on("dialog_empty", click("CANCEL"), "alarms_empty")
    app.on("dialog_named", click("CANCEL"), "alarms_empty")
    app.on("selected_menu", click("Copy"), "alarms_folder")
    app.back("root_fab", "root")
    app.back("alarms_empty", "root")
    app.back("alarms_fab", "alarms_empty")
    app.back("alarms_folder", "root")
    app.back("selected", "alarms_folder")
    app.back("selected_menu", "selected")
    app.back("inside", "alarms_folder")
    app.back("inside_clip", "alarms_folder")
    app.crash("paste-into-self", "crashed",
              "FATAL EXCEPTION: main\nProcess: com.amaze.filemanager, PID: 4711\n"
              "java.lang.IllegalArgumentException: Cannot paste folder test2 into itself\n"
              "\tat com.amaze.filemanager.asynchronous.PasteHelper.checkTarget(PasteHelper.java:96)\n"
              "\tat com.amaze.filemanager.ui.MainFragment.onPaste(MainFragment.java:412)")
    report = """Title: Crash when pasting a folder into itself

Go into the Alarms folder and use the add button to make a folder called test2.
Long press test2, open the three dot menu and cut it. Then open test2 and paste.
The app dies instead of refusing the paste.

--- comment ---
Can confirm on 3.8, happens with copy as well maybe?
--- comment ---
Copy shows an error toast, only cut crashes.
"""
    summaries = {
        0: "Tapping Alarms opens that folder, which turns out to be empty",
        3: 'Typing "test2" fills the name field of the Create folder dialog and enables CREATE',
        7: "Cut puts folder test2 on the clipboard and returns to the Alarms listing",
    }
    script = Script(app, spec(["Open the Alarms folder", "Create a folder named test2 with the add button",
                               "Long press test2 and cut it from the overflow menu", "Open test2",
                               "Paste into test2"],
                              ["The app crashes when pasting a folder into itself"], True),
                    inputs={"name": "test2"},
                    summaries=summaries,
                    extra_keeps=[("root", click(rid="fab")), ("alarms_fab", click("File")),
                                 ("selected_menu", click("Copy"))])
    return app, report, script


def fitness():
    app = App("fitness-mini", "today")
    app.screen("today", "MainActivity", "Today tab with step count and a Workouts tab button",
               button("Workouts"), button("Profile"))
    app.screen("profile", "ProfileActivity", "Profile with weight and height", label("72 kg"))
    app.screen("workouts", "MainActivity", "Workouts tab with no logged workouts",
               icon("New workout", "fab"), button("History"))
    app.screen("history_empty", "HistoryActivity", "Workout history is empty", label("Nothing yet"))
    app.screen("session", "SessionActivity", "Empty workout session with an Add exercise button",
               button("Add exercise"), button("Discard"))
    app.screen("catalog", "CatalogActivity", "Exercise catalog listing Squat and Bench press",
               row("Squat"), row("Bench press"))
    app.screen("bench", "SessionActivity", "Session with Bench press and no sets", button("Discard"))
    app.screen("squat", "SessionActivity", "Session with Squat; the reps field is empty",
               field("Reps", "reps"), button("Discard"))
    app.screen("reps", "SessionActivity", "Session with Squat; 12 reps entered but no set added",
               field("12", "reps"), button("Add set"))
    app.screen("one_set", "SessionActivity", "Session with Squat showing one set of 12 reps",
               field("12", "reps"), button("Add set"), button("Finish workout"))
    app.screen("two_sets", "SessionActivity", "Session with Squat showing two sets of 12 reps",
               field("12", "reps"), button("Add set"), button("Finish workout"))
    app.screen("finish", "SessionActivity", "Dialog asking to save the finished workout",
               button("Save"), button("Keep going"))
    app.screen("logged", "MainActivity", "Workouts tab with one logged workout today",
               icon("New workout", "fab"), button("History"))
    app.screen("history", "HistoryActivity", "History lists one squat workout from today", row("Squat workout"))
    app.screen("entry", "WorkoutDetail", "Workout detail with two sets of squats and a share icon",
               icon("Share", "share"), icon("Delete", "delete"))
    crash_screen(app)
    app.step("today", click("Workouts"), "workouts")
    app.step("workouts", click(rid="fab"), "session")
    app.step("session", click("Add exercise"), "catalog")
    app.step("catalog", click("Squat"), "squat")
    app.step("squat", type_in("reps", "12"), "reps")
    app.step("reps", click("Add set"), "one_set")
    app.step("one_set", click("Add set"), "two_sets")
    app.step("two_sets", click("Finish workout"), "finish")
    app.step("finish", click("Save"), "logged")
    app.step("logged", click("History"), "history")
    app.step("history", click("Squat workout"), "entry")
    app.step("entry", click(rid="share"), "crashed")
    app.on("today", click("Profile"), "profile")
    app.on("workouts", click("History"), "history_empty")
    app.on("catalog", click("Bench press"), "bench")
    app.on("session", click("Discard"), "workouts")
    app.on("finish", click("Keep going"), "two_sets")
    app.on("one_set", click("Finish workout"), "finish_one")
    app.screen("finish_one", "SessionActivity", "Dialog asking to save a one-set workout",
               button("Keep going"))
    app.on("finish_one", click("Keep going"), "one_set")
    app.on("entry", click(rid="delete"), "logged")
    app.back("profile", "today")
    app.back("history_empty", "workouts")
    app.back("history", "logged")
    app.back("entry", "history")
    app.crash("share-workout", "crashed",
              "FATAL EXCEPTION: main\nandroid.os.FileUriExposedException: file:///data/workouts/1.csv exposed "
              "beyond app through ClipData.Item.getUri()\n\tat org.fit.ShareAction.run(ShareAction.java:33)")
    report = """Title: Sharing a saved workout crashes

1. Open Workouts and start a new workout
2. Add the Squat exercise, enter 12 reps
3. Add two sets and finish, then save
4. Open History and select the workout
5. Tap share

The app crashes every time.
"""
    script = Script(app, spec(["Open Workouts", "Start a new workout", "Add the Squat exercise", "Enter 12 reps",
                               "Add two sets", "Finish and save", "Open History", "Select the workout",
                               "Tap share"],
                              ["Sharing crashes with a FileUriExposedException"], True),
                    inputs={"reps": "12"},
                    extra_keeps=[("workouts", click("History")), ("catalog", click("Bench press"))])
    return app, report, script


def cash():
    app = App("cash-mini", "overview")
    app.screen("overview", "MainActivity", "Budget overview with a monthly spending chart",
               button("Accounts"), button("Reports"))
    app.screen("reports", "ReportsActivity", "Reports tab with a pie chart", label("Pie chart"))
    app.screen("accounts", "MainActivity", "Accounts tab listing Checking and Savings",
               row("Checking"), row("Savings"))
    app.screen("savings", "AccountActivity", "Savings account with no transactions", label("No transactions"))
    app.screen("checking", "AccountActivity", "Checking account with an add transaction button",
               icon("New transaction", "fab"))
    app.screen("tx_amount", "TransactionEditor", "Transaction editor with the amount field focused",
               field("Amount", "amount"), field("Description", "desc"))
    app.screen("tx_amount_set", "TransactionEditor", "Transaction editor with amount 42.50 and the keyboard open",
               field("42.50", "amount"), field("Description", "desc"))
    app.screen("tx_desc_focus", "TransactionEditor", "Transaction editor with the description field focused",
               field("42.50", "amount"), field("Description", "desc"))
    app.screen("tx_desc_set", "TransactionEditor",
               "Transaction editor with amount 42.50, description Groceries and the keyboard open",
               field("42.50", "amount"), field("Groceries", "desc"))
    app.screen("tx_ready", "TransactionEditor",
               "Transaction editor with the keyboard hidden, showing the Category picker and Save",
               field("42.50", "amount"), field("Groceries", "desc"), button("Category"), button("Save"))
    app.screen("categories", "CategoryPicker", "Category list: Food, Rent, Travel",
               row("Food"), row("Rent"), row("Travel"))
    app.screen("tx_food", "TransactionEditor", "Transaction editor with category Food selected",
               field("42.50", "amount"), field("Groceries", "desc"), button("Save"))
    app.screen("tx_rent", "TransactionEditor", "Transaction editor with category Rent selected",
               field("42.50", "amount"), field("Groceries", "desc"), button("Save"))
    app.screen("account_tx", "AccountActivity", "Checking account listing one 42.50 Groceries transaction",
               row("Groceries -42.50"))
    app.screen("account_land", "AccountActivity",
               "Checking account in landscape layout; an Export button appears next to the transaction list",
               row("Groceries -42.50"), button("Export"))
    app.screen("export", "ExportDialog", "Export dialog offering CSV and QIF formats",
               button("CSV"), button("QIF"))
    app.screen("export_csv", "ExportDialog", "Export dialog with CSV chosen and a date range selector",
               button("This month"), button("All time"))
    app.screen("export_all", "ExportDialog", "Export dialog with CSV over all time, ready to export",
               button("Export now"))
    app.screen("tx_detail", "TransactionDetail", "Detail of the Groceries transaction", label("Food"))
    crash_screen(app)
    app.step("overview", click("Accounts"), "accounts")
    app.step("accounts", click("Checking"), "checking")
    app.step("checking", click(rid="fab"), "tx_amount")
    app.step("tx_amount", type_in("amount", "42.50"), "tx_amount_set")
    app.step("tx_amount_set", press("Enter"), "tx_desc_focus")
    app.step("tx_desc_focus", type_in("desc", "Groceries"), "tx_desc_set")
    app.step("tx_desc_set", press("Back"), "tx_ready")
    app.step("tx_ready", click("Category"), "categories")
    app.step("categories", click("Food"), "tx_food")
    app.step("tx_food", click("Save"), "account_tx")
    app.step("account_tx", rotate(), "account_land")
    app.step("account_land", click("Export"), "export")
    app.step("export", click("CSV"), "export_csv")
    app.step("export_csv", click("All time"), "export_all")
    app.step("export_all", click("Export now"), "crashed")
    app.on("overview", click("Reports"), "reports")
    app.on("accounts", click("Savings"), "savings")
    app.on("categories", click("Rent"), "tx_rent")
    app.on("account_tx", click("Groceries -42.50"), "tx_detail")
    app.on("account_land", rotate(), "account_tx")
    app.on("export", click("QIF"), "account_land")
    app.on("export_csv", click("This month"), "account_land")
    app.back("reports", "overview")
    app.back("accounts", "overview")
    app.back("savings", "accounts")
    app.back("checking", "accounts")
    app.back("tx_amount", "checking")
    app.back("tx_amount_set", "tx_ready_amount")
    app.screen("tx_ready_amount", "TransactionEditor", "Transaction editor with amount 42.50 and no description",
               field("42.50", "amount"), field("Description", "desc"))
    app.back("tx_detail", "account_tx")
    app.crash("export-after-rotation", "crashed",
              "FATAL EXCEPTION: main\njava.lang.IllegalStateException: Can not perform this action after "
              "onSaveInstanceState\n\tat org.cash.ExportDialog.show(ExportDialog.java:74)")
    report = """Title: Export crashes after rotating the account screen

Add a transaction to Checking: amount 42.50, press enter, description Groceries, hide the keyboard,
category Food, save. Rotate to landscape, tap Export, pick CSV, All time, Export now. Crash.
"""
    script = Script(app, spec(["Open Checking in Accounts", "Add a transaction of 42.50",
                               "Press enter and describe it as Groceries", "Hide the keyboard",
                               "Pick the Food category and save", "Rotate to landscape",
                               "Export as CSV for all time"],
                              ["Export crashes with an IllegalStateException"], True),
                    inputs={"amount": "42.50", "desc": "Groceries"},
                    extra_keeps=[("accounts", click("Savings"))])
    return app, report, script


MAIN = [calc, music, notes, anki, weather, diary, habits, amaze, fitness, cash]


# ---- single-purpose fixtures -------------------------------------------------

def bugless():
    app = App("bugless-mini", "home")
    app.screen("home", "MainActivity", "A static about page with the app version", label("Version 1.0"))
    report = """Title: App crashes when opening the about page

Opening the about page crashes the app.
"""
    rules = [{"role": "ReportAnalysis", "respond": spec(["Open the about page"], ["The app crashes"], True)}]
    return app, report, rules


def guard():
    """A crash report the app cannot exhibit; the evaluator claims success anyway."""
    app = App("guard-mini", "settings")
    app.screen("settings", "SettingsActivity", "Settings form with a Save button", button("Save"), button("Reset"))
    app.screen("saved", "SettingsActivity", "Settings saved; a toast confirms the change", button("Save"),
               button("Reset"))
    app.screen("never", "CrashDialog", CRASHED[1])
    app.on("settings", click("Save"), "saved")
    app.on("saved", click("Reset"), "settings")
    app.crash("unreachable", "never", "FATAL EXCEPTION: main\njava.lang.RuntimeException: unreachable")
    report = """Title: Saving settings crashes

Tap Save on the settings page and the app crashes.
"""
    rules = [
        {"role": "ReportAnalysis", "respond": spec(["Tap Save"], ["The app crashes after saving"], True)},
        {"role": "ActionFilter", "scope": "item", "regex": "^#\\d+ Click <Button", "respond": "keep"},
        {"role": "PathEvaluation", "scope": "item", "match": "Settings saved", "respond": "success"},
        {"role": "PathEvaluation", "scope": "item", "match": "Settings form", "respond": "continue"},
    ]
    return app, report, rules


# ---- adversarial suite: look-alike widgets ---------------------------------

def lookalike(name, theme, before, lure, after, log, report):
    """`before` and `after` are (label, visual) screens around a stage with four
    identical buttons labelled `lure`; only the fourth advances."""
    app = App(name, "s0")
    keys = []
    for i, (text, visual) in enumerate(before):
        keys.append(f"s{i}")
        app.screen(f"s{i}", theme, visual, button(text), button("Help"))
    stage = f"s{len(before)}"
    app.screen(stage, theme, "Four identical buttons labelled " + lure + " in a grid",
               *[button(lure) for _ in range(4)])
    app.screen("dud", theme, "A toast says this " + lure.lower() + " button does nothing yet", button("OK"))
    app.screen("help", "HelpActivity", "Help page with frequently asked questions", label("FAQ"))
    for i, (text, _) in enumerate(before):
        nxt = f"s{i + 1}"
        app.step(f"s{i}", click(text), nxt)
        app.on(f"s{i}", click("Help"), "help")
    for node in (1, 2, 3):
        app.on(stage, click(lure, node=node), "dud")
    app.on("dud", click("OK"), stage)
    app.back("help", "s0")
    after_keys = []
    for j, (text, visual) in enumerate(after):
        key = f"t{j}"
        after_keys.append(key)
        app.screen(key, theme, visual, button(text))
    app.step(stage, click(lure, node=4), after_keys[0])
    lure_index = len(app.gt) - 1
    crash_screen(app)
    for j, (text, _) in enumerate(after):
        nxt = after_keys[j + 1] if j + 1 < len(after) else "crashed"
        app.step(after_keys[j], click(text), nxt)
    app.crash(name + "-crash", "crashed", log)
    steps = [f"Tap {t}" for t, _ in before] + [f"Tap the working {lure} button"] + [f"Tap {t}" for t, _ in after]
    script = Script(app, spec(steps, ["The app crashes"], True), loose=True, lookalike=lure_index,
                    extra_keeps=[("dud", click("OK"))])
    return app, report, script


ADVERSARIAL = [
    lambda: lookalike(
        "vault-mini", "VaultActivity",
        [("Unlock", "Vault locked; tap Unlock to continue")], "Open",
        [("Export keys", "Vault opened; the key list has an Export keys action")],
        "FATAL EXCEPTION: main\njava.lang.SecurityException: key store not initialised",
        "Title: Exporting keys crashes\n\nUnlock the vault, open it and export the keys. Crash.\n"),
    lambda: lookalike(
        "gallery-mini", "GalleryActivity",
        [("Albums", "Photo grid of recent pictures"), ("Camera", "Album list with Camera and Screenshots")],
        "View",
        [("Rotate image", "Photo viewer showing a sunset with editing tools")],
        "FATAL EXCEPTION: main\njava.lang.OutOfMemoryError: Failed to allocate a 94371852 byte allocation",
        "Title: Rotating a camera photo crashes\n\n1. Open Albums\n2. Open Camera\n3. View a photo\n"
        "4. Rotate it\n"),
    lambda: lookalike(
        "wallet-mini", "WalletActivity",
        [("Cards", "Wallet home with balance and a Cards tab")], "Select",
        [("Set default", "Card details for the travel card"), ("Confirm", "Dialog confirming the new default card")],
        "FATAL EXCEPTION: main\njava.lang.IllegalStateException: default card already set",
        "Title: Setting a default card crashes\n\nGo to Cards, select the travel card, set it as default and "
        "confirm. The app crashes.\n"),
    lambda: lookalike(
        "chat-mini", "ChatActivity",
        [("Chats", "Welcome screen with a Chats button"), ("Team", "Chat list with the Team conversation")],
        "Reply",
        [("Send", "Reply box opened under the last message of Team")],
        "FATAL EXCEPTION: main\njava.lang.IndexOutOfBoundsException: reply target -1",
        "Title: Replying in the Team chat crashes\n\nOpen Chats, then Team, reply to the last message and "
        "send. Crash.\n"),
    lambda: lookalike(
        "recipes-mini", "RecipesActivity",
        [("Browse", "Recipes home with a Browse button")], "Cook",
        [("Start timer", "Cooking mode for pancakes with a timer"), ("Pause", "Timer running at 04:59")],
        "FATAL EXCEPTION: main\njava.lang.NullPointerException: timer handler is null",
        "Title: Pausing the cooking timer crashes\n\nBrowse, start cooking pancakes, start the timer and "
        "pause it. Crash.\n"),
]


def write(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data)
    else:
        path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n")


def emit(app, report, rules, subdir=""):
    base = OUT / subdir if subdir else OUT
    write(base / "apps" / f"{app.name}.json", app.document())
    write(base / "reports" / f"{app.name}.txt", report)
    write(base / "mocks" / f"{app.name}.json", rules)
    return {
        "report": f"reports/{app.name}.txt",
        "app": f"apps/{app.name}.json",
        "mock": f"mocks/{app.name}.json",
        **({"ground_truth_depth": len(app.gt)} if app.gt else {}),
    }


def main():
    main_rows = []
    for build in MAIN:
        app, report, script = build()
        main_rows.append(emit(app, report, script.rules()))
        if app.name == "amaze-mini":
            # Keeps every action and continues every path.
            write(OUT / "mocks" / "amaze-uninformed.json", [{"role": "ReportAnalysis", "respond": script.spec}])
    write(OUT / "main.json", main_rows)

    app, report, rules = bugless()
    bugless_row = emit(app, report, rules)
    write(OUT / "mixed.json", main_rows[:9] + [bugless_row])

    app, report, rules = guard()
    write(OUT / "guard.json", [emit(app, report, rules)])

    adversarial_rows = []
    for build in ADVERSARIAL:
        app, report, script = build()
        adversarial_rows.append(emit(app, report, script.rules(), "adversarial"))
    write(OUT / "adversarial" / "manifest.json", adversarial_rows)


if __name__ == "__main__":
    main()
