"""Judge prompt templates.

Bodies are plain text with ``{name}`` placeholders. ``render_prompt`` only
substitutes the placeholder tokens; every other byte is kept as stored.
"""

from __future__ import annotations

import re

GRM = """Please act as an impartial judge and evaluate the quality of the responses provided by two AI Chatbots to the Client question displayed below.

[Client Question]

{conv_his}

[The Start of Chatbot A's Response]

{response_A}

[The End of Chatbot A's Response]

[The Start of Chatbot B's Response]

{response_B}

[The End of Chatbot B's Response]

Output your final verdict by strictly following this format:

<critics>

[Provide a brief summary of your reasoning for the choice]

</critics>

<choice>

[[A]]

</choice>

Note: Use [[A]] if A is better, or [[B]] if B is better."""

EDIT = """[SYSTEM RULE: EDIT-ONLY MODE ENGAGED]

You are a text-processing bot. You are FORBIDDEN from answering the question. Your only function is to apply edits.

PRIMARY DIRECTIVE: Follow the <critique>. Nothing else.

1. THE EXCEPTION RULE: IF the <critique> states something is factually or mathematically wrong, you are authorized to fix ONLY THAT SINGLE PIECE OF INFORMATION. Do not explain. Do not add context. Just replace the wrong data with the correct data.
2. THE DEFAULT RULE: For everything else, if the <critique> does not explicitly order a change, you MUST NOT change it. Do not fix other errors. Do not improve style. Do not add information.
3. THE RE-CHECK RULE: Before you respond, you must check again whether the <critique> contain the content you modify.

Failure to follow these rules means you fail the task.

----------------------------------------

[Client Question]

{conv_his}

[The Start of Chatbot A's Response]

{response_A}

[The End of Chatbot A's Response]

[The Start of Chatbot B's Response]

{response_B}

[The End of Chatbot B's Response]

[The Start of Critique]

{critique}

[The End of Critique]"""

_SCORES_ZERO = """<thinking>
    Put here how the generated critique repeats points.
</thinking>

<scores>
    <critique_f1>0</critique_f1>
    <critique_precision>0</critique_precision>
    <critique_recall>0</critique_recall>
</scores>"""

_SCORES_FORMAT = """<thinking>
    Put the thinking process here.
</thinking>

<scores>
    <critique_f1>CritiqueScore</critique_f1>
    <critique_precision>Precision_critique</critique_precision>
    <critique_recall>Recall_critique</critique_recall>
</scores>"""

_SIMILARITY_TAIL = """
<Generated Evaluation Content>

{critiques}

</Generated Evaluation Content>

<Reference Evaluation Content>

{reference_critiques}

</Reference Evaluation Content>"""


def _similarity_body(intro: str, word: str, adjective: str) -> str:
    # the two similarity prompts differ only in the intro and the argument wording
    return f"""{intro}

## Part 1: First check

First check if the generated critique repeats the same point across multiple times. If yes, directly output without conducting part 2:

{_SCORES_ZERO}

## Part 2: Steps for F1 Score Calculation

1. Count Reference {adjective}Arguments (N_ref):
    - Check if the reference identifies a fatal error (critical factual error, harmful statement, or fundamental misunderstanding).
        - If yes: Only this fatal error counts. Set N_ref = 1.
        - If no: Count all unique {word}Arguments (decisive reasons that could justify the choice by themselves). Set N_ref to this count.
2. Count Generated {adjective}Arguments (N_gen):
    - Identify all unique {word}Arguments in the generated evaluation.
    - Set N_gen to this count.
3. Count True Positives (TP):
    - Initialize TP = 0.
    - For each reference {word.lower()}argument, search for a match in generated {word.lower()}arguments.
    - Matching Rule: Both semantic meaning and stance (which response and positive/negative) must align.
        - Example: "Response A is more detailed" only matches with similar praise of Response A, not Response B.
        - For fatal errors: Generated must identify the same error in the same response.
    - Each generated argument can only match once.
    - Increment TP by 1 for each valid match.
4. Calculate Scores:
    - Precision_critique: TP / N_gen (0 if N_gen = 0)
    - Recall_critique: TP / N_ref (0 if N_ref = 0)
    - CritiqueScore: 2 * (Precision * Recall) / (Precision + Recall) (0 if sum = 0)

Output Format (rounded to 4 decimal places):

{_SCORES_FORMAT}
{_SIMILARITY_TAIL}"""


SIMILARITY_CORE = _similarity_body(
    "I will provide you with a generated evaluation content and a reference evaluation content. "
    "Your task is to analyze the similarity between the <Generated Evaluation Content> and the "
    "<Reference Evaluation Content> by calculating F1 scores based on their key arguments.\n\n"
    "Core Principle: Focus exclusively on \"Key Arguments\" - decisive reasons that are powerful "
    "enough to justify the final choice on their own. Identify these core justifications, not minor points.",
    "Key ", "Key ",
)

SIMILARITY_ALL = _similarity_body(
    "I will provide you with a generated evaluation content and a reference evaluation content. "
    "Your task is to analyze the similarity between the <Generated Evaluation Content> and the "
    "<Reference Evaluation Content> by calculating F1 scores based on their all arguments.",
    "", "All ",
)

META_JUDGE = """You are an expert evaluator tasked with assessing the quality of critiques comparing two responses.

You will be given:
1. A conversation history
2. Response A
3. Response B
4. One or more critiques comparing Response A and Response B

Your task is to evaluate whether the critique(s) are accurate and correct based on the actual content of the responses. Assign a score between 0 and 1, where higher scores indicate more accurate critiques.

You must provide your response in the following XML format:

<thinking>
    Put your detailed analysis here. Examine the critique
    against the actual responses and explain your reasoning
    for the score.
</thinking>

<scores>
    <critique_f1>Score</critique_f1>
    <critique_precision>Score</critique_precision>
    <critique_recall>Score</critique_recall>
</scores>

Note: Assign the same score to all three metrics (critique_f1, critique_precision, and critique_recall).

<Conversation History>

{conv_his}

</Conversation History>

<Response A>

{response_A}

</Response A>

<Response B>

{response_B}

</Response B>

<Critiques>

{critiques}

</Critiques>"""

TEMPLATES = {
    "grm": GRM,
    "edit": EDIT,
    "similarity_core": SIMILARITY_CORE,
    "similarity_all": SIMILARITY_ALL,
    "meta_judge": META_JUDGE,
}

PLACEHOLDER_NAMES = ("conv_his", "response_A", "response_B", "critiques", "reference_critiques", "critique")
_PLACEHOLDER = re.compile(r"\{(" + "|".join(PLACEHOLDER_NAMES) + r")\}")


class RenderError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


def required_placeholders(template_id: str) -> tuple:
    body = _template(template_id)
    seen = []
    for name in _PLACEHOLDER.findall(body):
        if name not in seen:
            seen.append(name)
    return tuple(seen)


def _template(template_id):
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise RenderError(f"unknown template {template_id!r}") from None


def render_prompt(template_id: str, bindings: dict) -> str:
    """Substitute placeholders in one pass, so bound text containing braces is left alone."""
    body = _template(template_id)
    missing = [n for n in required_placeholders(template_id) if n not in bindings]
    if missing:
        raise RenderError(f"template {template_id!r} is missing placeholder(s): {', '.join(missing)}")
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), body)
