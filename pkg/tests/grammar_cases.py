"""The tool-call grammar table: 30 fixed strings with expected parses.

Each row is (text, expected) where expected is a list of per-call outcomes:
("ok", tool, args) for a successful parse and ("error",) for a recorded
parse failure. An empty list means no call should be recognized at all.
The last ten rows are the adversarial strings.
"""

GRAMMAR_CASES = [
    # -- plain forms -----------------------------------------------------------
    ("call_tool{tool: object_detection, args: []}", [("ok", "object_detection", [])]),
    (
        'call_tool{"tool": "object_detection", "args": []}',
        [("ok", "object_detection", [])],
    ),
    (
        "call_tool{'tool': 'robot_holding', 'args': []}",
        [("ok", "robot_holding", [])],
    ),
    (
        'call_tool{tool: dist_robot_to_obj, args: ["medicine1"]}',
        [("ok", "dist_robot_to_obj", ["medicine1"])],
    ),
    (
        "call_tool{tool: dist_robot_to_obj, args: ['medicine1']}",
        [("ok", "dist_robot_to_obj", ["medicine1"])],
    ),
    (
        'call_tool{tool: dist_between_objs, args: ["plant", "medicine1"]}',
        [("ok", "dist_between_objs", ["plant", "medicine1"])],
    ),
    (
        "call_tool{tool: dist_between_objs, args: ['plant', \"medicine1\"]}",
        [("ok", "dist_between_objs", ["plant", "medicine1"])],
    ),
    ("call_tool{tool: get_object_state, args: [mug]}", [("ok", "get_object_state", ["mug"])]),
    (
        'call_tool{ tool : check_free_path , args : [ "table" ] }',
        [("ok", "check_free_path", ["table"])],
    ),
    (
        'call_tool{tool: get_object_properties,\n  args: ["drawer"]}',
        [("ok", "get_object_properties", ["drawer"])],
    ),
    (
        'call_tool{args: ["mug"], tool: get_object_state}',
        [("ok", "get_object_state", ["mug"])],
    ),
    (
        'I will check first. call_tool{tool: get_spatial_relations, args: ["the mug"]} Then decide.',
        [("ok", "get_spatial_relations", ["the mug"])],
    ),
    (
        "call_tool{tool: object_detection, args: []} call_tool{tool: robot_holding, args: []}",
        [("ok", "object_detection", []), ("ok", "robot_holding", [])],
    ),
    (
        'call_tool{tool: a, args: ["1"]}\ncall_tool{tool: b, args: ["2"]}\ncall_tool{tool: c, args: []}',
        [("ok", "a", ["1"]), ("ok", "b", ["2"]), ("ok", "c", [])],
    ),
    ("call_tool{tool: a, args: [1, 2]}", [("ok", "a", ["1", "2"])]),
    ("call_tool{tool: object_detection, args: [  ]}", [("ok", "object_detection", [])]),
    (
        'call_tool {tool: detect_human_gaze, args: ["Adriana"]}',
        [("ok", "detect_human_gaze", ["Adriana"])],
    ),
    (
        'call_tool{tool: retrieve_user_information, args: ["Which medicine does she take?"]}',
        [("ok", "retrieve_user_information", ["Which medicine does she take?"])],
    ),
    (
        'call_tool{tool: human_hands_free, args: ["Adriana"]} '
        '{"final_response": "no_issue", "explanation": "all good"}',
        [("ok", "human_hands_free", ["Adriana"])],
    ),
    (
        'Reasoning...\ncall_tool{tool: dist_robot_to_human, args: ["Adriana"]}\nmore reasoning',
        [("ok", "dist_robot_to_human", ["Adriana"])],
    ),
    # -- adversarial -----------------------------------------------------------
    ("call_tool{tool: object_detection, args: []", [("error",)]),
    ("call_tool{tool: object_detection}", [("error",)]),
    ("call_tool{}", [("error",)]),
    ("call_tool{tool: , args: []}", [("error",)]),
    ('call_tool{tool: a, args: ["a]}', [("error",)]),
    ('call_tool{tool: a, args: "not a list"}', [("error",)]),
    ('call_tool{tool: a, args: [["nested"]]}', [("error",)]),
    ('call_tool{tool: a, args: ["x",]}', [("error",)]),
    ("calltool{tool: x, args: []}", []),
    ('call_tool{tool: a, args: ["{"]}', [("ok", "a", ["{"])]),
]
