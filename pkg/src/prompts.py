"""
Prompt templates sent through the judgment gateway.

Placeholders use string.Template syntax ($name) so JSON braces in the
instructions need no escaping. Bump a template's version whenever its text
changes: the version is part of the cache key.
"""

from dataclasses import dataclass
from string import Template


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    schema_id: str
    text: str

    def fill(self, **values):
        return Template(self.text).substitute({k: ("" if v is None else str(v)) for k, v in values.items()})


COUNTERFACTUAL = PromptTemplate(
    "counterfactual",
    "v1",
    "step_list",
    """You are reconstructing one step of a programming session in which a person
worked together with an AI coding tool. Estimate how an average developer would
have reached the same result WITHOUT any AI tool.

Produce the sequence of developer-only steps that replaces the tool step:
- the steps achieve the same code changes or actions the tool step achieved
- their granularity matches the surrounding steps of the session
- they are realistic things a developer does (docs, search engines, editors,
  terminals and other non-AI tools are allowed)
- they never mention an AI tool or AI assistance
- no step is tiny (a single keystroke) and no step is huge (writing a whole file)

EARLIER STEPS:
$context_block

STEP TO REPLACE:
$tool_block

FOLLOWING STEP:
$next_block

Reply with a JSON array of strings, one string per replacement step, and nothing else.
""",
)

PROCESS_LABEL = PromptTemplate(
    "process_label",
    "v1",
    "process_label",
    """You analyse actions from a collaborative coding session between a developer
and an AI tool. Decide which cognitive process the TARGET action serves.

Categories:
- planning: setting or revising goals, structuring code, choosing a strategy
  (designing a function, choosing data structures, sketching pseudocode,
  reading the task before coding)
- execution: turning plans into code or commands (typing or editing code,
  refactoring, implementing logic, running snippets)
- feedback: evaluating results (reading error messages, analysing stack traces,
  inspecting model output, checking docs to confirm reasoning)
- control: regulating the flow of work (re-prioritising, switching phases,
  postponing a fix, prompting the model for clarification)

Rules: use the neighbouring actions to interpret the function of the target
action, use the workflow steps to disambiguate vague actions, and label by the
function performed (suggesting code is planning, running code is execution,
showing errors is feedback).

Previous action: $previous_action
TARGET action: $current_action
Next action: $next_action
Previous workflow step: $previous_workflow_step
Matched workflow step: $matched_workflow_step
Next workflow step: $next_workflow_step

Reply with one JSON object: {"process_type": "planning|execution|feedback|control", "justification": "<short reason>"}
""",
)

OUTPUT_USE_LABEL = PromptTemplate(
    "output_use_label",
    "v1",
    "output_use_label",
    """You study how developers use AI-generated content. Decide how the AI-assisted
step below is used by the developer afterwards. Base the decision only on what is
visible in FOLLOWING STEPS; the workflow context is secondary framing and loses
whenever it disagrees with FOLLOWING STEPS.

Labels (pick exactly one):
- Reuse: the AI content is taken over directly with little or no change
  (pasting generated code or text, running a command the AI gave, accepting a
  suggestion with only trivial edits)
- Apply: an idea or method from the AI content is visibly adapted to the
  developer's own context (a concrete edit, test or plan change that clearly
  follows that specific guidance without being a copy)
- Pushback: the developer questions, tests, corrects or debugs the AI content
  because it looks wrong, incomplete or unresolved
- Reject: no visible trace that this AI content influenced what happens next
  (later steps are unrelated, generic continuation, or only thematically close)

Prefer Reuse over Apply for direct uptake, Reject over Apply for generic
continuation, and use Pushback only for friction with the AI output itself.

TASK: $task_description
PREVIOUS HUMAN STEP: $previous_human_step
AI-ASSISTED STEP: $current_ai_assisted_step
WORKFLOW CONTEXT:
  previous step: $previous_workflow_step
  matched step: $matched_workflow_step
  next step: $next_workflow_step
FOLLOWING STEPS:
$next_steps_sequence

Reply with only: {"label": "Reuse|Apply|Pushback|Reject", "justification": "<evidence from FOLLOWING STEPS>"}
""",
)

RECALL_GRADE = PromptTemplate(
    "recall_grade",
    "v1",
    "recall_grade",
    """Grade whether a developer's answer about their own code repository is backed
by the repository snippets below. Use the snippets as the only evidence; give no
credit for plausible but unsupported claims. Judge factual accuracy and
completeness with respect to the question.

Grades:
- fully correct: supported, materially complete, no meaningful false claims
- mostly correct: core supported, minor omissions or a small unsupported detail
- partially correct: mixed; important parts missing, unsupported or wrong
- incorrect: mostly unsupported, contradicted, or wrong on the main point
When in doubt choose the lower grade.

In the reason, cite file paths and line numbers, say which parts are supported
and which are not, and why the grade beats its neighbours.

QUESTION: $question
ANSWER: $answer
SNIPPETS:
$snippets

Reply with only a JSON object with exactly the keys "answer" (one of
"incorrect", "partially correct", "mostly correct", "fully correct") and "reason".
""",
)

AI_STEP_CLASSIFY = PromptTemplate(
    "ai_step_classify",
    "v1",
    "ai_step",
    """Decide whether the TARGET step of a programming session involved interacting
with an AI tool (prompting it, reading its output, accepting or applying its
edits, using inline completions). Steps done with ordinary tools only are not
AI-assisted.

Previous step: $previous_step
TARGET step: $current_step
Next step: $next_step

Reply with only: {"ai_assisted": true|false, "justification": "<short reason>"}
""",
)

SEGMENT_ANNOTATE = PromptTemplate(
    "segment_annotate",
    "v1",
    "segment_annotation",
    """Describe in one short sentence what the developer is doing in this recorded
work segment. Prefix the sentence with an activity tag in parentheses, one of:
(reading generation), (writing prompt), (editing generation), (writing code),
(reading code), (test manually checking), (browsing), (other).
If nothing meaningful is visible say "No meaningful action visible".

Segment span: $span
Event counts: $event_counts
Recovered text: $recovered_text
Screenshots: $screenshots

Reply with only: {"description": "<tag> <sentence>"}
""",
)

SEGMENT_GROUP = PromptTemplate(
    "segment_group",
    "v1",
    "segment_group",
    """Group consecutive annotated work segments of a programming session into
higher-level workflow steps. Every segment must belong to exactly one group,
groups must be consecutive and keep the original order. Write one sentence per
group that keeps the activity tag of its dominant segment.

Segments:
$segments

Reply with only: {"steps": [{"segments": [<segment numbers>], "text": "<step sentence>"}]}
""",
)

STEP_PARAPHRASE = PromptTemplate(
    "step_paraphrase",
    "v1",
    "paraphrase",
    """Rewrite this workflow step with different wording while keeping its meaning,
its activity tag and its level of detail.

Step: $step

Reply with only: {"text": "<paraphrased step>"}
""",
)

SYNTHETIC_WORKFLOW = PromptTemplate(
    "synthetic_workflow",
    "v1",
    "step_list",
    """A developer asked an AI coding tool to do the following software engineering
task. Estimate how an average developer would complete the same task without any
AI tool, as a sequence of realistic developer-only steps of moderate granularity
(no single keystrokes, no "wrote the whole file"). Never mention AI assistance.

TASK REQUEST:
$instruction

Variant: $variant

Reply with a JSON array of strings, one per step, and nothing else.
""",
)

TEMPLATES = {
    t.template_id: t
    for t in (
        COUNTERFACTUAL,
        PROCESS_LABEL,
        OUTPUT_USE_LABEL,
        RECALL_GRADE,
        AI_STEP_CLASSIFY,
        SEGMENT_ANNOTATE,
        SEGMENT_GROUP,
        STEP_PARAPHRASE,
        SYNTHETIC_WORKFLOW,
    )
}
