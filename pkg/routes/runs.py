"""
Run routes module
Lists stored experiment runs and their result rows
"""

from dateutil.parser import isoparse
from flask import Blueprint, current_app, jsonify, request

from database import get_db_connection

runs_bp = Blueprint('runs', __name__, url_prefix='/runs')


@runs_bp.route('/')
def index():
    """All runs with optional `since` filter and pagination"""
    page = request.args.get('page', 1, type=int)
    per_page = request.args.get('per_page', 20, type=int)
    since = request.args.get('since', '').strip()

    # Validate per_page values
    if per_page not in [10, 20, 50, 100]:
        per_page = 20

    # Validate page number
    if page < 1:
        page = 1

    where, params = '', []
    if since:
        try:
            since_text = isoparse(since).strftime('%Y-%m-%d %H:%M:%S')
        except ValueError:
            return jsonify({'error': f'invalid since timestamp: {since}'}), 400
        where, params = 'WHERE created_at >= ?', [since_text]

    conn = get_db_connection(current_app.config['DATABASE'])
    total_count = conn.execute(f'SELECT COUNT(*) as count FROM runs {where}', params).fetchone()['count']

    # Calculate pagination info
    total_pages = max(1, (total_count + per_page - 1) // per_page)
    if page > total_pages:
        page = total_pages
    offset = (page - 1) * per_page

    runs = conn.execute(f'''
        SELECT run_id, model, master_seed, row_count, failure_count, created_at
        FROM runs {where}
        ORDER BY id DESC
        LIMIT ? OFFSET ?
    ''', params + [per_page, offset]).fetchall()
    conn.close()

    return jsonify({
        'runs': [dict(run) for run in runs],
        'page': page,
        'per_page': per_page,
        'total_count': total_count,
        'total_pages': total_pages,
        'has_prev': page > 1,
        'has_next': page < total_pages,
    })


@runs_bp.route('/<run_id>')
def view(run_id):
    """One run with its rows and failed cells"""
    conn = get_db_connection(current_app.config['DATABASE'])
    run = conn.execute('SELECT * FROM runs WHERE run_id = ?', (run_id,)).fetchone()
    if run is None:
        conn.close()
        return jsonify({'error': 'Run not found'}), 404
    rows = conn.execute('SELECT * FROM result_rows WHERE run_id = ? ORDER BY nu, r, id', (run_id,)).fetchall()
    failures = conn.execute('SELECT nu, r, df, reason FROM failed_cells WHERE run_id = ? ORDER BY id',
                            (run_id,)).fetchall()
    conn.close()
    return jsonify({
        'run': dict(run),
        'rows': [dict(row) for row in rows],
        'failures': [dict(cell) for cell in failures],
    })
